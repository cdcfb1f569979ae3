import numpy as np
import pytest

from cassirecon import (
    CassiOperator,
    CodedMask,
    GaussianShrinkPrior,
    IdentityPrior,
    OraclePrior,
    SolverConfig,
    SolverState,
    Trace,
    adjoint_init,
    data_step_accelerated,
    data_step_closed_form,
    linear_schedule,
    rho,
    run_pnp_baseline,
    run_sampler,
    sliding_plan,
)
from cassirecon.core import TriImage
from cassirecon.exceptions import (
    DegeneratePixelError,
    ExternalPriorError,
    NumericalAbortError,
)
from cassirecon.metrics import mean_band_psnr
from cassirecon.synthetic import smooth_cube

from conftest import dense_operator_matrix

SCHED = linear_schedule()


def binary_mask(h, w, seed):
    return CodedMask((np.random.default_rng(seed).random((h, w)) < 0.5).astype(float))


class TestRho:
    def test_unit_plugin(self):
        sched = linear_schedule(1, 0.5, 0.51)  # alpha_bar = 0.5 -> sigma_bar = 1
        cfg = SolverConfig(lam=15.0, sigma_n=1.0)
        assert rho(cfg, sched, 1) == pytest.approx(15.0, abs=1e-12)

    def test_noiseless_gives_zero(self):
        cfg = SolverConfig(lam=15.0, sigma_n=0.0)
        assert rho(cfg, SCHED, 600) == 0.0

    def test_table_oracle(self):
        cfg = SolverConfig(lam=15.0, sigma_n=0.05)
        ab = SCHED.alpha_bars[599]
        want = 15.0 * 0.05**2 / ((1.0 - ab) / ab)
        got = rho(cfg, SCHED, 600)
        assert abs(got - want) <= 1e-12 * want


class TestClosedFormDataStep:
    def test_scalar_proximal_form(self):
        op = CassiOperator(CodedMask(np.ones((4, 5))), 0, 1)
        rng = np.random.default_rng(0)
        y = rng.random((4, 5))
        z = rng.random((1, 4, 5))
        mu = 0.7
        got = data_step_closed_form(op, y, z, mu)
        want = (y[None] + mu * z) / (1.0 + mu)
        assert np.abs(got - want).max() <= 1e-12

    def test_huge_mu_returns_prior_iterate(self):
        op = CassiOperator(binary_mask(6, 6, 1), 1, 3)
        rng = np.random.default_rng(2)
        y = rng.random((6, 8))
        z = rng.random((3, 6, 6))
        got = data_step_closed_form(op, y, z, 1e12)
        assert np.abs(got - z).max() <= 1e-6 * np.abs(z).max()

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_dense_normal_equations(self, seed):
        rng = np.random.default_rng(seed)
        op = CassiOperator(CodedMask(rng.uniform(0.05, 1.0, (8, 8))), 1, 4)
        phi = dense_operator_matrix(op)
        y = rng.standard_normal((op.height, op.width_ext))
        z = rng.standard_normal((4, 8, 8))
        mu = float(rng.uniform(0.05, 2.0))
        got = data_step_closed_form(op, y, z, mu).ravel()
        n = phi.shape[1]
        want = np.linalg.solve(
            phi.T @ phi + mu * np.eye(n), phi.T @ y.ravel() + mu * z.ravel()
        )
        assert np.abs(got - want).max() <= 1e-6 * max(1.0, np.abs(want).max())
        # normal-equation residual of the production output
        lhs = phi.T @ (phi @ got) + mu * got
        rhs = phi.T @ y.ravel() + mu * z.ravel()
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(1.0, np.linalg.norm(rhs))

    def test_degenerate_pixels_reported(self):
        mask = np.ones((4, 4))
        mask[0, 0] = 0.0  # snapshot pixel (0, 0) is covered by band 0 only
        op = CassiOperator(CodedMask(mask), 1, 2)
        with pytest.raises(DegeneratePixelError) as err:
            data_step_closed_form(op, np.zeros((4, 5)), np.zeros((2, 4, 4)), 0.0)
        assert (0, 0) in err.value.coords


class TestAcceleratedDataStep:
    def setup_method(self):
        rng = np.random.default_rng(3)
        self.op = CassiOperator(CodedMask(rng.uniform(0.1, 1.0, (6, 6))), 1, 3)
        self.x_true = rng.random((3, 6, 6))
        self.y = self.op.apply_array(self.x_true)

    def fresh_state(self):
        return SolverState(
            x_t=np.zeros_like(self.x_true), y1=self.y.copy(), t=100
        )

    def test_first_iteration_equals_closed_form(self):
        rng = np.random.default_rng(4)
        x_tilde = rng.random(self.x_true.shape)
        rho_t = 0.3
        state = self.fresh_state()
        got = data_step_accelerated(self.op, self.y, state, x_tilde, rho_t, sc=1.0)
        want = data_step_closed_form(self.op, self.y, x_tilde, rho_t)
        assert (got == want).all()

    def test_consistent_point_is_fixed(self):
        state = self.fresh_state()
        got = data_step_accelerated(self.op, self.y, state, self.x_true, 0.5, sc=1.0)
        assert np.abs(got - self.x_true).max() <= 1e-12
        assert np.abs(state.y1 - self.y).max() <= 1e-12

    def test_accumulator_grows_with_residual_history(self):
        rng = np.random.default_rng(5)
        x_tilde = rng.random(self.x_true.shape)
        state = self.fresh_state()
        data_step_accelerated(self.op, self.y, state, x_tilde, 0.5, sc=1.0)
        want = self.y + (self.y - self.op.apply_array(x_tilde))
        assert np.abs(state.y1 - want).max() <= 1e-12

    def test_paired_run_residual_direction(self):
        # 32x32x4 scene, shrink prior, 50 steps: accelerated ends at lower
        # data residual than the plain closed form under identical config/seed
        truth = smooth_cube(32, 32, 4, seed=11)
        op = CassiOperator(binary_mask(32, 32, 21), 1, 4)
        y = op.simulate(truth, 0.1, seed=31)
        base = dict(
            lam=15.0, zeta=0.0, guidance_scale=1.0, t_start=100, step_count=50,
            seed=0, sigma_n=0.1, plan_kind="sliding", normalize=True,
        )
        _, t_acc = run_sampler(
            SolverConfig(**base, accelerate=True), SCHED, op, y, GaussianShrinkPrior(1.0)
        )
        _, t_off = run_sampler(
            SolverConfig(**base, accelerate=False), SCHED, op, y, GaussianShrinkPrior(1.0)
        )
        assert t_acc.records[-1].residual <= t_off.records[-1].residual


def oracle_setup(seed=1):
    truth = smooth_cube(32, 32, 4, seed=seed)
    rng = np.random.default_rng(0)
    mask = CodedMask(rng.uniform(0.25, 1.0, (32, 32)))  # positive coverage everywhere
    op = CassiOperator(mask, 1, 4)
    y = op.simulate(truth, 0.0, seed=0)
    prior = OraclePrior(truth, sliding_plan(4))
    return truth, op, y, prior


class TestRunSampler:
    def test_oracle_reconstruction_is_exact(self):
        truth, op, y, prior = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=600, step_count=20, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        recon, trace = run_sampler(cfg, SCHED, op, y, prior, reference=truth)
        assert mean_band_psnr(recon.data, truth.data) >= 60.0
        assert len(trace.records) == 20

    def test_identity_prior_zero_guidance_is_decoupled(self):
        _, op, y, _ = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, guidance_scale=0.0, t_start=50, step_count=10,
            seed=3, sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        a, _ = run_sampler(cfg, SCHED, op, y, IdentityPrior())
        b, _ = run_sampler(cfg, SCHED, op, y, IdentityPrior())
        assert np.isfinite(a.data).all()
        assert a.data.shape == (4, 32, 32)
        assert (a.data == b.data).all()

    def test_full_stochastic_run_is_seeded(self):
        truth, op, y, _ = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=1.0, t_start=80, step_count=15, seed=7,
            sigma_n=0.05, plan_kind="sliding",
        )
        a, ta = run_sampler(cfg, SCHED, op, y, GaussianShrinkPrior(1.0))
        b, tb = run_sampler(cfg, SCHED, op, y, GaussianShrinkPrior(1.0))
        assert (a.data == b.data).all()
        assert [r.residual for r in ta.records] == [r.residual for r in tb.records]

    def test_trace_completeness(self):
        truth, op, y, prior = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=90, step_count=9, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        _, trace = run_sampler(cfg, SCHED, op, y, prior, reference=truth)
        assert len(trace.records) == 9
        ts = [r.t for r in trace.records]
        assert all(a > b for a, b in zip(ts, ts[1:]))
        for r in trace.records:
            assert r.rho == pytest.approx(rho(cfg, SCHED, r.t), abs=1e-15)
            assert np.isfinite(r.residual)
            assert r.psnr is not None
        assert "accumulator" in trace.header["acceleration"]

    def test_warm_start_runs(self):
        truth, op, y, prior = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=60, step_count=6, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False, warm_start=True,
        )
        recon, _ = run_sampler(cfg, SCHED, op, y, prior)
        assert mean_band_psnr(recon.data, truth.data) >= 60.0

    def test_non_finite_prior_aborts_with_step_index(self):
        class RoguePrior:
            def score(self, req):
                tri = TriImage(np.zeros(req.image.data.shape))
                tri.data[1, 0, 0] = np.inf  # corrupt after construction
                return tri

        _, op, y, _ = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=40, step_count=4, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        with pytest.raises(NumericalAbortError, match="step 0"):
            run_sampler(cfg, SCHED, op, y, RoguePrior())

    def test_external_failure_carries_band_context(self):
        class FailingPrior:
            def score(self, req):
                raise ExternalPriorError("connection dropped")

        _, op, y, _ = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=40, step_count=4, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        with pytest.raises(ExternalPriorError, match="band 0"):
            run_sampler(cfg, SCHED, op, y, FailingPrior())

    def test_degenerate_coverage_with_zero_rho_raises(self):
        mask = np.ones((8, 8))
        mask[0, 0] = 0.0
        op = CassiOperator(CodedMask(mask), 1, 3)
        truth = smooth_cube(8, 8, 3, seed=0)
        y = op.simulate(truth, 0.0, seed=0)
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=30, step_count=3, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        with pytest.raises(DegeneratePixelError):
            run_sampler(cfg, SCHED, op, y, OraclePrior(truth, sliding_plan(3)))


class TestPnPBaseline:
    def test_oracle_baseline_is_exact(self):
        truth, op, y, prior = oracle_setup()
        cfg = SolverConfig(mu=0.1)
        recon, _ = run_pnp_baseline(cfg, op, y, prior, 5, sched=SCHED, reference=truth)
        assert mean_band_psnr(recon.data, truth.data) >= 60.0

    def test_zero_iterations_is_adjoint_init(self):
        truth, op, y, _ = oracle_setup()
        recon, trace = run_pnp_baseline(SolverConfig(), op, y, IdentityPrior(), 0, sched=SCHED)
        assert (recon.data == adjoint_init(op, y.data)).all()
        assert trace.records == []

    def test_shrink_prior_beats_adjoint_baseline(self):
        # threshold pre-validated by a paired-run sweep: the margin is ~17 dB
        truth = smooth_cube(32, 32, 8, seed=2)
        op = CassiOperator(binary_mask(32, 32, 3), 1, 8)
        y = op.simulate(truth, 0.02, seed=4)
        base_psnr = mean_band_psnr(adjoint_init(op, y.data), truth.data)
        cfg = SolverConfig(lam=0.04, sigma_n=0.02, mu=1.0)
        recon, _ = run_pnp_baseline(
            cfg, op, y, GaussianShrinkPrior(1.0), 10, sched=SCHED, reference=truth
        )
        assert mean_band_psnr(recon.data, truth.data) >= base_psnr + 3.0

    def test_monotone_data_fidelity_with_oracle(self):
        truth, op, y, prior = oracle_setup()
        _, trace = run_pnp_baseline(SolverConfig(mu=0.2), op, y, prior, 6, sched=SCHED)
        residuals = [r.residual for r in trace.records]
        assert all(b <= a + 1e-9 for a, b in zip(residuals, residuals[1:]))

    def test_mu_schedule_length_checked(self):
        truth, op, y, prior = oracle_setup()
        with pytest.raises(ValueError):
            run_pnp_baseline(SolverConfig(), op, y, prior, 3, mu=[0.1, 0.2], sched=SCHED)
        recon, _ = run_pnp_baseline(
            SolverConfig(), op, y, prior, 3, mu=[0.1, 0.2, 0.4], sched=SCHED
        )
        assert mean_band_psnr(recon.data, truth.data) >= 60.0


class TestTraceIO:
    def test_jsonl_round_trip(self, tmp_path):
        truth, op, y, prior = oracle_setup()
        cfg = SolverConfig(
            lam=15.0, zeta=0.0, t_start=30, step_count=3, seed=0,
            sigma_n=0.0, plan_kind="sliding", normalize=False,
        )
        _, trace = run_sampler(cfg, SCHED, op, y, prior, reference=truth)
        path = tmp_path / "run.trace.jsonl"
        trace.write_jsonl(path)
        back = Trace.read_jsonl(path)
        assert back.header == trace.header
        assert back.records == trace.records


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(lam=0.0)
    with pytest.raises(ValueError):
        SolverConfig(guidance_scale=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(zeta=2.0)
    with pytest.raises(ValueError):
        SolverConfig(mu=0.0)
