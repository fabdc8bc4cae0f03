import itertools

import numpy as np
import pytest

import nlsgap.soliton as soliton_mod
from nlsgap.grid import fft3, ifft3, l2_norm, make_grid, signed_permutation
from nlsgap.soliton import (SolitonParams, aitken, compute_M, compute_R,
                            euler_lagrange_residual, gaussian_guess, petviashvili_step,
                            solve_soliton)


def fourier_shift(grid, f, a, axis=0):
    """f(x - a e_axis) for band-limited f, via a phase ramp."""
    xi = grid.xi.reshape([-1 if ax == axis else 1 for ax in range(3)])
    return ifft3(grid, fft3(grid, f) * np.exp(-1j * xi * a))


def centroid(grid, f, axis=0):
    x = grid.coords()[axis]
    w = f * f
    return float(np.sum(x * w) / np.sum(w))


class TestParams:
    def test_gamma_from_beta(self):
        assert SolitonParams(beta=1.0).gamma == 1.5
        assert SolitonParams(beta=0.75).gamma == pytest.approx(2.5 / 1.5)

    @pytest.mark.parametrize("kw", [dict(beta=0.0), dict(beta=1.0, tau=0.0),
                                    dict(beta=1.0, max_iter=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SolitonParams(**kw)


class TestM:
    def test_gaussian_dual_formula(self):
        g = make_grid(20, 64)
        r = g.radius()
        phi = np.exp(-r * r)
        minus_lap = (6 - 4 * r * r) * phi
        direct = np.sum(phi * (phi + minus_lap)) / np.sum(phi ** 4)
        assert compute_M(g, phi, 1.0) == pytest.approx(direct, rel=1e-12)

    def test_homogeneity(self):
        g = make_grid(10, 20)
        phi = gaussian_guess(g)
        assert compute_M(g, 2 * phi, 1.0) == pytest.approx(compute_M(g, phi, 1.0) / 4, rel=1e-13)
        assert compute_M(g, 2 * phi, 0.75) == pytest.approx(
            2 ** -1.5 * compute_M(g, phi, 0.75), rel=1e-13)

    def test_fixed_point(self, desk_soliton):
        assert abs(compute_M(desk_soliton.grid, desk_soliton.phi, 1.0) - 1) < 1e-10

    def test_zero_field(self):
        g = make_grid(4, 8)
        with pytest.raises(soliton_mod.SolitonError):
            compute_M(g, np.zeros(g.shape), 1.0)


class TestR:
    def test_radial(self):
        g = make_grid(20, 64)
        phi = np.exp(-g.radius() ** 2)
        for ax in range(3):
            assert abs(compute_R(g, phi, 1.0, ax)) < 1e-12

    def test_translated(self):
        g = make_grid(20, 64)
        phi = np.exp(-g.radius() ** 2)
        plus = fourier_shift(g, phi, 0.3)
        minus = fourier_shift(g, phi, -0.3)
        r1 = compute_R(g, plus, 1.0, 0)
        assert abs(r1) > 1e-3
        assert abs(compute_R(g, plus, 1.0, 1)) < 1e-12
        assert abs(compute_R(g, plus, 1.0, 2)) < 1e-12
        assert compute_R(g, minus, 1.0, 0) == pytest.approx(-r1, rel=1e-10)

    def test_degenerate_denominator(self):
        g = make_grid(8, 16)
        x1, x2, x3 = g.coords()
        phi = np.broadcast_to(np.exp(-(x2 ** 2 + x3 ** 2)), g.shape).copy()  # no x1 dependence
        assert compute_R(g, phi, 1.0, 0) == 0.0


class TestResidual:
    def test_zero_field(self):
        g = make_grid(4, 8)
        assert euler_lagrange_residual(g, np.zeros(g.shape), 1.0) == np.inf

    def test_single_mode(self):
        g = make_grid(10, 16)
        x1, _, _ = g.coords()
        phi = np.broadcast_to(np.sin(2 * np.pi * x1 / g.L), g.shape).copy()
        k2 = (2 * np.pi / g.L) ** 2
        closed = l2_norm(g, (1 + k2) * phi - phi ** 3) / l2_norm(g, phi)
        assert euler_lagrange_residual(g, phi, 1.0) == pytest.approx(closed, rel=1e-12)


class TestStep:
    def test_fixed_point(self, desk_soliton):
        g, phi = desk_soliton.grid, desk_soliton.phi
        out = petviashvili_step(g, phi, desk_soliton.params)
        assert l2_norm(g, out - phi) <= 10 * desk_soliton.params.tau * l2_norm(g, phi)

    def test_translation_is_removed(self, desk_soliton):
        g = desk_soliton.grid
        shifted = fourier_shift(g, desk_soliton.phi, 0.05)
        before = centroid(g, shifted)
        after = centroid(g, petviashvili_step(g, shifted, SolitonParams(beta=1.0)))
        classic = centroid(g, petviashvili_step(g, shifted, SolitonParams(beta=1.0, delta=0.0)))
        assert abs(after) < 0.1 * abs(before)
        assert abs(classic) > 0.5 * abs(before)  # delta = 0 leaves the offset in place

    def test_delta_zero_is_classical(self):
        g = make_grid(12, 24)
        phi = gaussian_guess(g)
        p = SolitonParams(beta=1.0, delta=0.0)
        step0 = petviashvili_step(g, phi, p)
        stepd = petviashvili_step(g, phi, SolitonParams(beta=1.0))
        assert np.abs(step0 - stepd).max() <= 1e-15 * np.abs(step0).max()
        # independent realization with full complex transforms
        ksq = sum(x ** 2 for x in np.meshgrid(g.xi, g.xi, g.xi, indexing="ij"))
        P, Q = fft3(g, phi), fft3(g, phi ** 3)
        M = np.sum((1 + ksq) * P * P).real / np.sum(P * Q).real
        classic = ifft3(g, M ** 1.5 * Q / (1 + ksq))
        assert np.abs(step0 - classic).max() <= 1e-13 * np.abs(classic).max()

    def test_rejects_nonpositive_M(self, monkeypatch):
        g = make_grid(8, 16)
        monkeypatch.setattr(soliton_mod, "_ratio_M", lambda *a: -1.0)
        with pytest.raises(soliton_mod.SolitonError, match="M ="):
            petviashvili_step(g, gaussian_guess(g), SolitonParams(beta=1.0))


class TestAitken:
    def test_geometric_exact(self, rng):
        a = rng.standard_normal((4, 4, 4))
        c = rng.standard_normal((4, 4, 4))
        r = rng.uniform(-0.9, 0.9, (4, 4, 4))
        f = [a + c * r ** n for n in range(3)]
        np.testing.assert_allclose(aitken(*f), a, atol=1e-12 * (1 + np.abs(c / (1 - r)).max()))

    def test_constant_guard(self, rng):
        f = rng.standard_normal((3, 3, 3))
        np.testing.assert_array_equal(aitken(f, f.copy(), f.copy()), f)

    def test_improves_on_iterates(self):
        g = make_grid(15, 60)
        p = SolitonParams(beta=1.0, use_aitken=False)
        phi = gaussian_guess(g)
        for _ in range(6):
            phi = petviashvili_step(g, phi, p)
        f1 = petviashvili_step(g, phi, p)
        f2 = petviashvili_step(g, f1, p)
        acc = aitken(phi, f1, f2)
        assert euler_lagrange_residual(g, acc, 1.0) <= euler_lagrange_residual(g, f2, 1.0)


class TestSolve:
    def test_desk_converges(self, desk_soliton):
        s = desk_soliton
        assert s.converged and s.residual <= 1e-11
        assert abs(s.M - 1) <= 1e-10
        assert max(abs(r) for r in s.R) <= 1e-12
        assert len(s.residual_history) == len(s.M_history) == len(s.R_history) == s.iterations + 1

    def test_positive(self, desk_soliton):
        assert desk_soliton.phi.min() > 0

    def test_radial_symmetry(self, desk_soliton):
        phi = desk_soliton.phi
        worst = max(np.linalg.norm(signed_permutation(phi, perm, signs) - phi)
                    for perm in itertools.permutations(range(3))
                    for signs in itertools.product((1, -1), repeat=3))
        assert worst <= 1e-10 * np.linalg.norm(phi)

    def test_exponential_decay_rate(self, desk_soliton):
        g, phi = desk_soliton.grid, desk_soliton.phi
        c = g.N // 2
        x = np.abs(g.x)
        sel = (x >= g.L / 4) & (x <= 3 * g.L / 8)
        rate = -np.polyfit(x[sel], np.log(x[sel] * phi[:, c, c][sel]), 1)[0]
        assert 0.9 <= rate <= 1.1

    def test_monotone_tail(self, desk_soliton):
        tail = desk_soliton.residual_history[-10:]
        assert all(b <= 1.5 * a for a, b in zip(tail, tail[1:]))

    def test_fixed_point_invariant_without_aitken(self, desk_grid):
        s = solve_soliton(desk_grid, SolitonParams(beta=0.8, use_aitken=False, max_iter=300))
        assert s.converged
        out = petviashvili_step(desk_grid, s.phi, s.params)
        assert l2_norm(desk_grid, out - s.phi) <= 10 * s.params.tau * l2_norm(desk_grid, s.phi)

    def test_warm_start_from_translated(self, desk_soliton):
        g = desk_soliton.grid
        start = fourier_shift(g, desk_soliton.phi, 0.05, axis=1)
        s = solve_soliton(g, SolitonParams(beta=1.0), initial=start)
        assert s.converged
        assert abs(centroid(g, s.phi, axis=1)) < 1e-5

    def test_iteration_cap(self, desk_grid):
        s = solve_soliton(desk_grid, SolitonParams(beta=1.0, max_iter=3))
        assert not s.converged and not s.diverged
        assert len(s.residual_history) == 4

    def test_coarse_grid_flagged(self):
        s = solve_soliton(make_grid(50, 60), SolitonParams(beta=1.0))
        assert not s.converged and s.under_resolved
        assert "N/4" in s.message

    def test_divergence_detector(self, desk_grid, monkeypatch):
        original = soliton_mod._step_from
        calls = {"n": 0}

        def unstable(grid, diag, params):
            calls["n"] += 1
            out = original(grid, diag, params)
            if calls["n"] > 30:
                out = out + 1e-6 * 3.0 ** (calls["n"] - 30) * np.cos(2 * np.pi * grid.coords()[0] / grid.L)
            return out

        monkeypatch.setattr(soliton_mod, "_step_from", unstable)
        s = solve_soliton(desk_grid, SolitonParams(beta=1.0, use_aitken=False, tau=1e-14))
        assert s.diverged and not s.converged
        assert "N/4" in s.message
        assert min(s.residual_history) < 1e-3
        assert euler_lagrange_residual(desk_grid, s.phi, 1.0) == min(s.residual_history)
