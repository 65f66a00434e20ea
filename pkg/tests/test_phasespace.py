import math

import numpy as np
import pytest

from kdblockade.amplitudes import Resonance1D
from kdblockade.dynamics import StateVector1D
from kdblockade.errors import DomainError, GridError
from kdblockade.phasespace import (
    CatMetrics,
    WignerGrid,
    cat_metrics,
    fwhm_on_ladder,
    is_sub_poissonian,
    marginals,
    mean_energy,
    measured_separation,
    momentum_wavefunction,
    peak_separation,
    probability_trace,
    synthesize,
    wigner,
    wigner_direct,
)
from kdblockade.specfun import RealGrid

SMALL = RealGrid.for_states(12)


def superposition(*pairs, size=13):
    c = np.zeros(size, dtype=complex)
    for n, a in pairs:
        c[n] = a
    return c / np.linalg.norm(c)


def most_negative_snapshot(state, grid, samples=16):
    best = None
    for t in state.time + np.linspace(0.0, 0.5, samples, endpoint=False):
        w = wigner(synthesize(state, t, grid))
        if best is None or w.W.min() < best.W.min():
            best = w
    return best


class TestSynthesis:
    def test_ground_state_gaussian(self):
        psi = synthesize(StateVector1D.basis(0, 4), 0.0, SMALL)
        ref = (2 * math.pi) ** -0.25 * np.exp(-SMALL.points**2 / 4)
        np.testing.assert_allclose(psi.values, ref, atol=1e-14)
        assert psi.norm() == pytest.approx(1.0, abs=1e-10)

    def test_relative_phase(self):
        # C_2 / C_0 picks up exp(-4 pi i t): a sign flip at a quarter period, identity at a half
        c = superposition((0, 1), (2, 1))
        start = np.abs(synthesize(c, 0.0, SMALL).values) ** 2
        flipped = np.abs(synthesize(superposition((0, 1), (2, -1)), 0.0, SMALL).values) ** 2
        np.testing.assert_allclose(np.abs(synthesize(c, 0.25, SMALL).values) ** 2, flipped, atol=1e-14)
        np.testing.assert_allclose(np.abs(synthesize(c, 0.5, SMALL).values) ** 2, start, atol=1e-14)
        assert np.max(np.abs(flipped - start)) > 1e-2

    def test_norm_preserved(self):
        c = superposition((0, 0.3), (4, 1j), (8, -0.7))
        for t in (0.0, 0.13, 0.71):
            assert synthesize(c, t, SMALL).norm() == pytest.approx(1.0, abs=1e-10)

    def test_momentum_of_ground_state(self):
        m = momentum_wavefunction(StateVector1D.basis(0, 2), 0.0, SMALL)
        np.testing.assert_allclose(np.abs(m.values), (2 * math.pi) ** -0.25 * np.exp(-SMALL.points**2 / 4), atol=1e-14)

    def test_grid_too_small(self):
        with pytest.raises(GridError):
            synthesize(StateVector1D.basis(8, 10), 0.0, RealGrid.symmetric(4.0))


class TestWigner:
    def test_ground_state_origin(self):
        w = wigner(synthesize(StateVector1D.basis(0, 4), 0.0, SMALL))
        i, j = np.argmin(np.abs(w.q)), np.argmin(np.abs(w.p))
        assert w.W[i, j] == pytest.approx(1 / math.pi, abs=1e-12)
        assert w.integral() == pytest.approx(1.0, abs=1e-4)
        assert w.W.min() > -1e-12

    def test_fock_state_negative_origin(self):
        w = wigner(synthesize(StateVector1D.basis(1, 4), 0.0, SMALL))
        i, j = np.argmin(np.abs(w.q)), np.argmin(np.abs(w.p))
        assert w.W[i, j] == pytest.approx(-1 / math.pi, abs=1e-12)

    def test_marginals_exact(self):
        c = superposition((0, 1), (4, 0.5j), (8, -0.8))
        psi = synthesize(c, 0.3, SMALL)
        w = wigner(psi)
        pos, mom = marginals(w)
        assert np.max(np.abs(pos - psi.density())) < 1e-6
        ref = synthesize(c, 0.3, RealGrid(w.p), momentum=True).density()
        assert np.max(np.abs(mom - ref)) < 1e-6
        assert pos.min() > -1e-8 and mom.min() > -1e-8

    def test_direct_matches_fft(self):
        c = superposition((0, 1), (2, 1j), (6, 0.4))
        psi = synthesize(c, 0.2, RealGrid.for_states(6, spacing=1 / 8))
        fast = wigner(psi)
        rows = np.arange(10, len(psi.grid) - 10, 17)
        slow = wigner_direct(psi, rows=rows)
        assert np.max(np.abs(fast.W[rows] - slow.W)) < 1e-10

    def test_parity_symmetry(self):
        # even-parity state: W(q, p) = W(-q, -p); the p axis is symmetric when the sample count is odd
        c = superposition((0, 1), (2, 0.5j), (4, 0.3))
        w = wigner(synthesize(c, 0.17, SMALL))
        assert len(w.q) % 2 == 1
        np.testing.assert_allclose(w.W, w.W[::-1, ::-1], atol=1e-12)

    def test_p_max_crops(self):
        w = wigner(synthesize(StateVector1D.basis(0, 4), 0.0, SMALL), p_max=5.0)
        assert np.all(np.abs(w.p) <= 5.0)

    def test_cat_negativity(self, two_cat):
        _, _, traj = two_cat
        w = most_negative_snapshot(traj.final, RealGrid.for_states(12, spacing=1 / 8))
        assert w.W.min() < 0
        assert w.integral() == pytest.approx(1.0, abs=1e-4)

    def test_binary_round_trip(self, tmp_path):
        w = wigner(synthesize(superposition((0, 1), (2, 1)), 0.1, RealGrid.symmetric(8.0, 0.25)))
        w.to_binary(tmp_path / "w.bin")
        raw = (tmp_path / "w.bin").read_bytes()
        assert raw[:4] == b"KDWG" and len(raw) == 16 + 24 * w.W.size
        back = WignerGrid.from_binary(tmp_path / "w.bin")
        np.testing.assert_array_equal(back.W, w.W)
        np.testing.assert_array_equal(back.q, w.q)
        np.testing.assert_array_equal(back.p, w.p)

    def test_csv(self, tmp_path):
        w = wigner(synthesize(StateVector1D.basis(0, 2), 0.0, RealGrid.symmetric(6.0, 0.5)))
        w.to_csv(tmp_path / "w.csv", "hdr")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "# hdr" and lines[1].startswith("# t =") and lines[2] == "q/x0,p/hbar k0,W"
        assert len(lines) == 3 + w.W.size


class TestTraces:
    def test_stationary_state(self):
        tr = probability_trace(StateVector1D.basis(3, 5), SMALL, 1.0, 11)
        np.testing.assert_allclose(tr.density, np.broadcast_to(tr.density[0], tr.density.shape), atol=1e-14)

    def test_breathing_period(self):
        c = superposition((0, 1), (2, 1))
        tr = probability_trace(c, SMALL, 1.0, 5)
        # densities of an N=2 superposition repeat every half period
        np.testing.assert_allclose(tr.density[0], tr.density[2], atol=1e-14)
        assert np.max(np.abs(tr.density[0] - tr.density[1])) > 1e-3

    def test_peak_separation(self):
        x = np.linspace(-10, 10, 2001)
        d = np.exp(-((x - 3) ** 2)) + 0.9 * np.exp(-((x + 4) ** 2))
        assert peak_separation(d, x) == pytest.approx(7.0, abs=0.02)
        assert peak_separation(np.exp(-(x**2)), x) is None


class TestMetrics:
    def test_fwhm_interpolation(self):
        p = np.zeros(20)
        p[[4, 6, 8, 10, 12]] = [0.1, 0.3, 0.4, 0.3, 0.1]
        # half maximum 0.2 sits halfway between neighbours on both sides
        assert fwhm_on_ladder(p, 8, 2) == pytest.approx(2 * (2 + 2 * 0.5))

    def test_mean_energy(self):
        assert mean_energy(StateVector1D.basis(3, 5)) == pytest.approx(3.5)
        assert mean_energy(superposition((0, 1), (2, 1))) == pytest.approx(1.5)

    def test_photon_recoil_example(self):
        c = np.zeros(700)
        c[648] = 1.0
        m = cat_metrics(c, Resonance1D(2, -1.8))
        assert m.n_photon_recoils == pytest.approx(4 * math.sqrt(648) / 0.2, rel=1e-12)
        assert m.dx_cat == m.dp_cat == pytest.approx(4 * math.sqrt(648))

    def test_sub_poissonian_rule(self):
        base = dict(n_max=16, poissonian_sigma=4.0, dx_cat=16.0, dp_cat=16.0, n_photon_recoils=1.0, mean_n=16.0)
        assert is_sub_poissonian(CatMetrics(width=7.9, **base))
        assert not is_sub_poissonian(CatMetrics(width=8.0, **base))

    def test_ground_peak_rejected(self):
        with pytest.raises(DomainError):
            cat_metrics(StateVector1D.basis(0, 4), Resonance1D(2, 0.0))

    def test_two_cat(self, two_cat):
        res, _, traj = two_cat
        m = cat_metrics(traj.final, res, RealGrid.for_states(12, spacing=1 / 16), samples=200)
        assert m.n_max == 8
        assert m.dx_cat == pytest.approx(4 * math.sqrt(8))
        assert m.dx_measured == pytest.approx(m.dx_cat, rel=0.10)
        assert m.dp_measured == pytest.approx(m.dx_measured, rel=0.05)
        assert m.sub_poissonian

    def test_measured_separation_needs_two_peaks(self):
        with pytest.raises(DomainError):
            measured_separation(StateVector1D.basis(0, 2), SMALL, samples=5)
