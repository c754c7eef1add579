from stalebc.channels import make_blackwell_with_state
from stalebc.plotting import plot_bounds, plot_rate_curve, plot_ts_landscape
from stalebc.rates import blackwell_ts_closed_form, c1_capacity, ts_ratio


def test_figures_are_written_and_reproducible(tmp_path):
    rows = [(0.2, 0.43, 0.001, 0.4364), (0.5, 0.299, 0.001, 0.3)]
    a = plot_rate_curve(rows, tmp_path / "a.png")
    b = plot_rate_curve(rows, tmp_path / "sub" / "b.png")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes()[:4] == b"\x89PNG"
    plot_bounds({"ts": 0.5989, "sp": 0.6103, "ub": 0.653}, tmp_path / "bounds.svg")
    assert (tmp_path / "bounds.svg").read_text().lstrip().startswith("<?xml")


def test_landscape_uses_generic_ratio(tmp_path):
    ch = make_blackwell_with_state()
    c1, _ = c1_capacity(ch)
    seen = []

    def ratio(px):
        v = ts_ratio(px, ch, c1)
        seen.append(abs(v - blackwell_ts_closed_form(px[0], px[2])))
        return v

    plot_ts_landscape(ratio, tmp_path / "land.png", n=21)
    assert len(seen) == 231 and max(seen) < 1e-9
