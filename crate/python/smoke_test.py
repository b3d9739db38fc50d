"""Smoke test for the openrabi Python bindings.

Build and install first, e.g. ``maturin develop -m crates/python/Cargo.toml``.
"""

import math

import openrabi


def main():
    p = openrabi.ModelParams(nu_q=0.8, g=0.0, kappa_c2=1 / 40)

    # Decoupled open spectrum: m - (p/2)(-1)^m nu_q - i kappa m(m-1).
    omegas = openrabi.open_eigenfrequencies(p, "+", n_max=6)
    assert any(abs(w - complex(2 - 0.4, -2 / 40)) < 1e-12 for w in omegas)

    roots = openrabi.closed_eigenfrequencies(p.with_g(0.5).with_kappa_c2(0.0), "+", n_max=40, window=(-2.0, 4.0))
    assert len(roots) > 0 and roots == sorted(roots)

    ss = openrabi.steady_state(p, "3,g")
    assert abs(ss["photon"] - 1.0) < 1e-6, ss

    run = openrabi.evolve(p.with_g(0.05), "2,g", [0.0, 5.0, 10.0])
    assert all(abs(t - 1.0) < 1e-8 for t in run["trace"])

    weights = openrabi.eigenmode_weights(p.with_g(0.3), "2,g")
    assert abs(sum(w for _, w, _ in weights) - 1.0) < 1e-6

    sectors = openrabi.full_spectrum_by_parity(p.with_g(0.5), levels=3)
    assert sorted(sectors) == ["++", "+-", "-+", "--"]
    assert all(len(v) == 9 for v in sectors.values())

    jc = openrabi.jc_eigenfrequencies(p.with_g(0.1), 1)
    assert len(jc) == 2 and not math.isclose(jc[0].real, jc[1].real)

    print(f"openrabi {openrabi.__version__}: ok")


if __name__ == "__main__":
    main()
