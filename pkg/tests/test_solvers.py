import math

import numpy as np
import pytest

from qcchain import (
    ChainParams,
    GmresConfig,
    HomogeneousState,
    LaplacianFactor,
    ModelKind,
    SingularOperatorError,
    assemble,
    coercivity_infimum,
    direct_solve,
    gfc_stationary_solve,
    gmres_solve,
    inner_l2,
    laplacian_matrix,
    lennard_jones,
    modified_cg_probe,
    moduli,
    norm_u12,
    norm_u_neg12,
    rhs_cosine,
    theoretical_envelope,
    trace_to_csv,
)

STATE01 = HomogeneousState.from_modulus_ratio(1.0, 0.1)
LOCAL_STATE = HomogeneousState(strain=1.0, phi2_f=0.4, phi2_2f=0.0)


class TestGmresConfig:
    def test_defaults(self):
        cfg = GmresConfig()
        assert cfg.variant == "plain" and cfg.rel_tol == 1e-12

    @pytest.mark.parametrize("kwargs", [
        {"variant": "cg"}, {"max_iter": 0}, {"rel_tol": 0.0},
    ])
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            GmresConfig(**kwargs)


class TestGmres:
    def test_single_iteration_when_preconditioned_operator_is_identity(self):
        params = ChainParams(16, 4)
        op = assemble(ModelKind.QCF, params, LOCAL_STATE)
        f = rhs_cosine(params)
        u, trace = gmres_solve(op, f, GmresConfig(variant="precond-l2"))
        assert trace.converged and trace.iterations == 1
        assert np.allclose(op.entries @ u, f, atol=1e-10 * np.abs(f).max())

    @pytest.mark.parametrize("n", [128])
    def test_finite_termination_small_interface(self, n):
        params = ChainParams(n, 4)
        op = assemble(ModelKind.QCF, params, STATE01)
        f = rhs_cosine(params)
        u, trace = gmres_solve(op, f, GmresConfig(variant="precond-l2"))
        rel = trace.residual_norms / trace.residual_norms[0]
        hit = np.nonzero(rel <= 1e-12)[0]
        assert hit.size and hit[0] <= 10  # 2K+2 = 10 distinct eigenvalues

    @pytest.mark.parametrize("variant", ["plain", "precond-l2", "precond-u12"])
    def test_residual_monotone_and_solution_correct(self, variant):
        params = ChainParams(32, 6)
        op = assemble(ModelKind.QCF, params, HomogeneousState.from_modulus_ratio(1.0, 0.5))
        f = rhs_cosine(params)
        u, trace = gmres_solve(op, f, GmresConfig(variant=variant))
        res = trace.residual_norms
        assert np.all(np.diff(res) <= res[0] * 1e-14)
        assert trace.converged
        ref = direct_solve(op, f)
        assert np.abs(u - ref).max() <= 1e-8 * np.abs(ref).max()

    def test_tracked_norm_identity_precond_u12(self):
        # ||L^{-1} r||_{U12} must equal ||r||_{U-12}, computed two ways
        params = ChainParams(32, 6)
        op = assemble(ModelKind.QCF, params, STATE01)
        f = rhs_cosine(params)
        cfg = GmresConfig(variant="precond-u12", max_iter=7)
        u, trace = gmres_solve(op, f, cfg)
        r = f - op.entries @ u
        via_solve = norm_u12(LaplacianFactor(params).solve(r), params)
        via_negative_norm = norm_u_neg12(r, params)
        assert via_solve == pytest.approx(via_negative_norm, rel=1e-12)
        assert trace.residual_norms[-1] == pytest.approx(via_solve, rel=1e-9)

    def test_error_trace_recorded(self):
        params = ChainParams(16, 4)
        op = assemble(ModelKind.QCF, params, STATE01)
        f = rhs_cosine(params)
        ref = direct_solve(op, f)
        u, trace = gmres_solve(op, f, GmresConfig(variant="precond-l2", record_error_against=ref))
        assert trace.error_norms is not None
        assert len(trace.error_norms) == len(trace.residual_norms)
        assert trace.error_norms[-1] <= 1e-8 * trace.error_norms[0]

    def test_stagnation_reports_not_raises(self):
        params = ChainParams(32, 6)
        op = assemble(ModelKind.QCF, params, HomogeneousState.from_modulus_ratio(1.0, 0.5))
        u, trace = gmres_solve(op, rhs_cosine(params), GmresConfig(variant="plain", max_iter=3))
        assert not trace.converged and trace.iterations == 3

    def test_asymptotic_contraction_preconditioned(self):
        params = ChainParams(128, 12)
        op = assemble(ModelKind.QCF, params, STATE01)
        f = rhs_cosine(params)
        q = (1 - math.sqrt(0.1)) / (1 + math.sqrt(0.1))
        for variant in ("precond-l2", "precond-u12"):
            _, trace = gmres_solve(op, f, GmresConfig(variant=variant, max_iter=25))
            res = trace.residual_norms
            rate = (res[20] / res[5]) ** (1.0 / 15.0)
            assert rate <= q + 0.05

    def test_raw_matrix_requires_params(self):
        params = ChainParams(8, 2)
        lap = laplacian_matrix(params)
        with pytest.raises(ValueError):
            gmres_solve(lap, np.ones(params.n_interior), GmresConfig())
        u, trace = gmres_solve(lap, np.ones(params.n_interior), GmresConfig(), params=params)
        assert trace.converged


class TestEnvelope:
    def test_iteration_zero(self):
        params = ChainParams(16, 4)
        assert theoretical_envelope("plain", 0, STATE01, params, 3.0) == 6.0

    def test_identity_limit(self):
        params = ChainParams(16, 4)
        state = HomogeneousState(strain=1.0, phi2_f=1.0, phi2_2f=0.0)  # A_F = phi''_F
        assert theoretical_envelope("precond-l2", 1, state, params, 5.0) == 0.0
        assert theoretical_envelope("precond-l2", 0, state, params, 5.0) == 10.0

    def test_contraction_value(self):
        params = ChainParams(16, 4)
        q = (1 - math.sqrt(0.1)) / (1 + math.sqrt(0.1))
        got = theoretical_envelope("precond-u12", 10, STATE01, params, 1.0)
        assert got == pytest.approx(2 * q ** 10, rel=1e-12)
        assert q == pytest.approx(0.5195, abs=1e-4)

    def test_plain_rate_depends_on_n(self):
        params = ChainParams(64, 8)
        state = HomogeneousState.from_modulus_ratio(1.0, 0.5)
        s = math.sqrt(2 * 0.5) / 64
        expected = 2 * ((1 - s) / (1 + s)) ** 4
        assert theoretical_envelope("plain", 4, state, params, 1.0) == pytest.approx(expected, rel=1e-12)


class TestGfcStationary:
    def test_local_limit_one_step(self):
        params = ChainParams(16, 4)
        res = gfc_stationary_solve(params, LOCAL_STATE, rhs_cosine(params))
        assert res.converged and res.spectral_radius <= 1e-12
        assert res.trace.iterations == 1

    def test_fixed_point_solves_force_based_system(self):
        params = ChainParams(32, 6)
        state = HomogeneousState.from_modulus_ratio(1.0, 0.6)
        f = rhs_cosine(params)
        res = gfc_stationary_solve(params, state, f, max_iter=400, tol=1e-12)
        assert res.converged
        qcf = assemble(ModelKind.QCF, params, state)
        u = direct_solve(qcf, f)
        # re-run to capture the iterate: the solver returns the trace only;
        # self-consistency is checked through the residual it minimizes
        assert res.trace.residual_norms[-1] <= 1e-10 * res.trace.residual_norms[0]
        assert res.spectral_radius < 1.0

    def test_observed_rate_matches_spectral_radius(self):
        params = ChainParams(32, 6)
        state = HomogeneousState.from_modulus_ratio(1.0, 0.3)
        f = rhs_cosine(params)
        res = gfc_stationary_solve(params, state, f, max_iter=300, tol=1e-11)
        rho = res.spectral_radius
        assert 0.1 < rho < 1.0
        r = res.trace.residual_norms
        tail = slice(len(r) - 11, len(r) - 1)
        observed = (r[tail.stop - 1] / r[tail.start - 1]) ** (1.0 / 10.0)
        assert observed == pytest.approx(rho, rel=0.1)
        assert res.converged

    def test_divergence_is_reported_not_raised(self, lj):
        # just beyond the interface-model stability strain the iteration
        # matrix has spectral radius > 1
        params = ChainParams(32, 8)
        lam = coercivity_infimum(assemble(ModelKind.QCE, params, moduli(lj, 1.0))).extracted_constant
        from qcchain import critical_strain_gfc
        f_gfc = critical_strain_gfc(lj, lam)
        state = moduli(lj, f_gfc + 2e-4)
        res = gfc_stationary_solve(params, state, rhs_cosine(params), max_iter=60)
        assert not res.converged
        assert res.spectral_radius > 1.0
        assert len(res.trace.residual_norms) == 61

    def test_singular_preconditioner_reported(self, lj):
        params = ChainParams(32, 8)
        lam = coercivity_infimum(assemble(ModelKind.QCE, params, moduli(lj, 1.0))).extracted_constant
        from qcchain import critical_strain_gfc
        f_gfc = critical_strain_gfc(lj, lam)
        with pytest.raises(SingularOperatorError, match="smallest eigenvalue"):
            gfc_stationary_solve(params, moduli(lj, f_gfc), rhs_cosine(params))


class TestModifiedCgProbe:
    def test_positive_definite_regime_has_no_singular_direction(self):
        params = ChainParams(16, 4)
        with pytest.raises(SingularOperatorError, match="no singular direction"):
            modified_cg_probe(params, LOCAL_STATE)

    def test_probe_finds_null_direction_and_blowup(self):
        params = ChainParams(128, 32)
        state = HomogeneousState.from_modulus_ratio(1.0, 0.4)
        probe = modified_cg_probe(params, state)
        d = probe.direction
        assert abs(probe.rayleigh) <= 1e-10 * norm_u12(d, params) ** 2
        # step sizes blow up once numerators are rescaled to unit size
        assert np.min(np.abs(probe.alpha_magnitudes / probe.numerators)) >= 1e8

    def test_bracketing_endpoints(self):
        import scipy.linalg

        params = ChainParams(128, 32)
        state = HomogeneousState.from_modulus_ratio(1.0, 0.4)
        op = assemble(ModelKind.QCF, params, state)
        sym = 0.5 * (op.entries + op.entries.T)
        lap = laplacian_matrix(params)
        n = params.n_interior
        w_lo, v_lo = scipy.linalg.eigh(sym, lap, subset_by_index=(0, 0))
        w_hi, v_hi = scipy.linalg.eigh(sym, lap, subset_by_index=(n - 1, n - 1))
        vm = v_lo[:, 0] / math.sqrt(params.eps)
        vp = v_hi[:, 0] / math.sqrt(params.eps)
        assert inner_l2(sym @ vp, vp, params.eps) > 0 > inner_l2(sym @ vm, vm, params.eps)


class TestDirectSolve:
    def test_laplacian_round_trip(self):
        params = ChainParams(8, 2)
        lap = laplacian_matrix(params)
        e0 = np.zeros(params.n_interior)
        e0[params.offset(0)] = 1.0
        assert np.allclose(direct_solve(lap, lap @ e0), e0, atol=1e-12)

    def test_qcf_round_trip(self, rng):
        params = ChainParams(32, 6)
        op = assemble(ModelKind.QCF, params, STATE01)
        u = rng.standard_normal(params.n_interior)
        got = direct_solve(op, op.entries @ u)
        assert np.abs(got - u).max() <= 1e-10 * np.abs(u).max()

    def test_zero_rhs(self):
        params = ChainParams(8, 2)
        assert np.array_equal(direct_solve(laplacian_matrix(params), np.zeros(params.n_interior)),
                              np.zeros(params.n_interior))

    def test_singular_reported(self):
        with pytest.raises(SingularOperatorError):
            direct_solve(np.zeros((3, 3)), np.ones(3))


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        params = ChainParams(16, 4)
        op = assemble(ModelKind.QCF, params, STATE01)
        f = rhs_cosine(params)
        ref = direct_solve(op, f)
        _, trace = gmres_solve(op, f, GmresConfig(variant="precond-l2", record_error_against=ref))
        path = tmp_path / "trace.csv"
        trace_to_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,residual_norm,error_norm"
        assert len(lines) == len(trace.residual_norms) + 1
        first = lines[1].split(",")
        assert float(first[1]) == trace.residual_norms[0]
