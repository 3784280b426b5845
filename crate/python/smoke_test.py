#!/usr/bin/env python3
"""Builds the beamjam_py extension, imports it, and exercises the bindings.

Run from anywhere:  python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build_and_import():
    subprocess.run(
        ["cargo", "build", "-p", "beamjam-py", "--release"], cwd=ROOT, check=True
    )
    lib = ROOT / "target" / "release" / "libbeamjam_py.so"
    stage = Path(tempfile.mkdtemp(prefix="beamjam_py_"))
    shutil.copy2(lib, stage / "beamjam_py.so")
    sys.path.insert(0, str(stage))
    import beamjam_py

    return beamjam_py


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b} (tol {tol})"


def main():
    bj = build_and_import()

    # Correlation matrix structure.
    r = bj.exp_corr(4, 0.5)
    approx(r[0][0].real, 1.0)
    approx(r[0][1].real, 0.5)
    approx(r[0][3].real, 0.125)
    approx(r[2][1].imag, 0.0)

    # DFT codebook columns are unit norm and orthogonal.
    book = bj.dft_codebook_matrix(4)
    col = lambda m, j: [row[j] for row in m]
    dot = lambda u, v: sum(x.conjugate() * y for x, y in zip(u, v))
    approx(abs(dot(col(book, 1), col(book, 1))), 1.0, 1e-12)
    approx(abs(dot(col(book, 0), col(book, 2))), 0.0, 1e-12)

    # Pilot book is orthonormal too.
    phi = bj.pilot_book(3)
    approx(abs(dot(col(phi, 0), col(phi, 0))), 1.0, 1e-12)
    approx(abs(dot(col(phi, 0), col(phi, 2))), 0.0, 1e-12)

    # Linear-algebra helpers.
    eye2 = [[complex(1), complex(0)], [complex(0), complex(1)]]
    diag49 = [[complex(4), complex(0)], [complex(0), complex(9)]]
    k = bj.kron(eye2, diag49)
    assert len(k) == 4 and len(k[0]) == 4
    approx(k[3][3].real, 9.0)
    s = bj.psd_sqrt(diag49)
    approx(s[0][0].real, 2.0, 1e-12)
    approx(s[1][1].real, 3.0, 1e-12)
    vals, vecs = bj.hermitian_eigendecomposition(diag49)
    approx(vals[0], 9.0, 1e-12)
    approx(vals[1], 4.0, 1e-12)
    approx(abs(vecs[1][0]), 1.0, 1e-12)  # first column pairs with λ=9

    # Detection theory: threshold calibration round-trips, and the bundled
    # τ=2 operating point at JNR = 5 dB lands at its known value.
    cfg = bj.SystemConfig(
        m_bs=4, m_ue=2, n_bs=4, n_ue=2, tau=2,
        rho_bs=0.9, rho_ue=0.9, rho_jm=0.9,
        p_t=10 ** 0.5, q_k=10 ** 0.5, sigma2=1.0,
    )
    gamma = bj.detection_threshold(cfg, 0.1)
    p_fa, p_d = bj.detection_tails(cfg, gamma)
    approx(p_fa, 0.1, 1e-6)
    approx(p_d, 0.8903, 5e-4)

    # Monte Carlo ROC agrees with the closed form at the same threshold.
    emp_fa, emp_d = bj.roc_monte_carlo(cfg, 4000, [gamma], seed=3)
    assert abs(emp_fa[0] - p_fa) < 0.03, (emp_fa, p_fa)
    assert abs(emp_d[0] - p_d) < 0.03, (emp_d, p_d)

    # A single estimation round returns finite, sane metrics.
    est_cfg = bj.SystemConfig(
        m_bs=8, m_ue=2, n_bs=8, n_ue=2, tau=4,
        rho_bs=0.6, rho_ue=0.6, rho_jm=0.6, q_k=2.0,
    )
    mse_a1, mse_norms, cos_sim, nmse_u, nmse_j = bj.estimation_trial(est_cfg, seed=5)
    assert mse_a1 >= 0 and mse_norms >= 0
    assert -1.0 <= cos_sim <= 1.0
    assert math.isfinite(nmse_u) and math.isfinite(nmse_j)

    # Experiment runners emit CSV with the documented header.
    names = bj.preset_names()
    assert "fig2" in names and len(names) == 7, names
    csv_text = bj.run_preset("fig2", trials=50)
    lines = csv_text.strip().splitlines()
    assert lines[0].startswith("scenario,tau,rho,jnr_db,snr_db,x_name,x_value,metric")
    assert len(lines) == 1 + 2 * 12 * 4, len(lines)

    toml_doc = """
scenario = "jammer_nmse"
trials = 25

[system]
m_bs = 8
m_ue = 2
n_bs = 8
n_ue = 2

[power]
jnr_db = 5.0

[sweep]
tau = [3]
rho = [0.5]
"""
    csv_text = bj.run_config(toml_doc)
    lines = csv_text.strip().splitlines()
    assert len(lines) == 4, lines  # header + three NMSE metrics
    assert any("nmse_jam_est_db" in line for line in lines)

    # Invalid input surfaces as ValueError with a diagnostic.
    try:
        bj.run_preset("fig99")
    except ValueError as e:
        assert "fig99" in str(e)
    else:
        raise AssertionError("expected ValueError for unknown preset")

    print("smoke test passed")


if __name__ == "__main__":
    main()
