"""Scattering pipeline: pull-back defects, shadowing, and the noise floor.

Oracles: a linear evolution pulled back linearly is the identity (up to
roundoff for a static metric), so the floor pipeline must sit at machine
scale; a tiny-amplitude nonlinear run must be indistinguishable from
linear; and synthetic power laws must be recovered exactly by the log-log
fit.  The nonlinear defect magnitudes themselves were measured once and
frozen as bands.
"""

import numpy as np
import pytest

from quintwave.exceptions import AccuracyError, ParameterError
from quintwave.grid import FieldState, RadialGrid
from quintwave.metric import Minkowski, StaticDecay
from quintwave.scattering import (
    PowerLawFit,
    ScatterReport,
    SliceCapture,
    decay_fit,
    extract_profile,
    free_energy_distance,
    scattering_diagnostics,
)
from quintwave.solver import EvolutionSpec, evolve, gaussian_data


@pytest.fixture(scope="module")
def grid():
    return RadialGrid(dr=0.05, n_cells=360)


@pytest.fixture(scope="module")
def flat_report(grid):
    init = gaussian_data(grid, amplitude=1.0, sigma=1.0)
    return scattering_diagnostics(Minkowski(), init, (2.0, 4.0, 8.0))


class TestDefects:
    def test_backward_defects_decrease(self, flat_report):
        d = flat_report.backward_defects
        assert len(d) == 2
        assert d[0] > d[1] > 0.0
        assert d[1] < d[0] / 5.0
        assert 5e-4 < d[0] < 1e-2

    def test_forward_defects_decrease(self, flat_report):
        f = flat_report.forward_defects
        assert f[0] > f[1] > f[2]
        # the profile is the pull-back from the last time; for a static
        # metric the linear push-forward undoes it to roundoff
        assert f[2] < 1e-10

    def test_floor_is_machine_scale(self, flat_report):
        assert max(flat_report.floor_backward) < 1e-10
        assert max(flat_report.floor_forward) < 1e-10
        # physics sits far above the floor
        assert flat_report.backward_defects[0] > 1e3 * max(flat_report.floor_backward)

    def test_perturbed_metric_pipeline(self, grid):
        init = gaussian_data(grid, amplitude=1.0, sigma=1.0)
        rep = scattering_diagnostics(
            StaticDecay(eps=0.05, gamma=0.3), init, (2.0, 4.0, 8.0), with_floor=False
        )
        d = rep.backward_defects
        assert d[0] > d[1] > 0.0

    def test_tiny_amplitude_sits_at_floor(self, grid):
        init = gaussian_data(grid, amplitude=1e-5, sigma=1.0)
        rep = scattering_diagnostics(Minkowski(), init, (2.0, 4.0), with_floor=False)
        assert max(rep.backward_defects) < 1e-12
        assert max(rep.forward_defects) < 1e-12

    def test_free_energy_matches_direct(self, flat_report, grid):
        init = gaussian_data(grid, amplitude=1.0, sigma=1.0)
        u_r = grid.diff1(init.u)
        direct = 0.5 * grid.integrate(u_r**2 + init.v**2)
        assert flat_report.free_energy_initial == pytest.approx(direct, rel=1e-12)

    def test_json_round_trip(self, flat_report):
        blob = flat_report.to_json()
        assert blob["times"] == [2.0, 4.0, 8.0]
        assert len(blob["backward_defects"]) == 2

    def test_input_validation(self, grid):
        init = gaussian_data(grid, amplitude=0.5, sigma=1.0)
        with pytest.raises(ParameterError):
            scattering_diagnostics(Minkowski(), init, (4.0, 2.0))
        with pytest.raises(ParameterError):
            scattering_diagnostics(Minkowski(), init, (3.0,))
        with pytest.raises(ParameterError):
            scattering_diagnostics(Minkowski(), init, (0.0, 2.0))


class TestProfile:
    def test_linear_pullback_recovers_data(self, grid):
        # matching cfl makes the backward sweep retrace the forward steps
        init = gaussian_data(grid, amplitude=0.7, sigma=1.2)
        spec = EvolutionSpec(
            metric=Minkowski(), initial=init, t_final=3.0, nonlinear=False, cfl=0.45
        )
        final = evolve(spec).final
        prof = extract_profile(Minkowski(), final, cfl=0.45)
        assert prof.t == 0.0
        assert free_energy_distance(prof, init) < 1e-10

    def test_mismatched_steps_leave_discretization_error(self, grid):
        # different forward/backward steps break exact reversal but stay
        # at the scheme's accuracy scale
        init = gaussian_data(grid, amplitude=0.7, sigma=1.2)
        spec = EvolutionSpec(
            metric=Minkowski(), initial=init, t_final=3.0, nonlinear=False, cfl=0.5
        )
        final = evolve(spec).final
        prof = extract_profile(Minkowski(), final, cfl=0.45)
        assert 1e-8 < free_energy_distance(prof, init) < 1e-2

    def test_distance_requires_matching_grids(self, grid):
        other = RadialGrid(dr=0.1, n_cells=100)
        a = gaussian_data(grid, amplitude=1.0, sigma=1.0)
        b = gaussian_data(other, amplitude=1.0, sigma=1.0)
        with pytest.raises(ParameterError):
            free_energy_distance(a, b)

    def test_slice_capture_missing_time(self, grid):
        cap = SliceCapture((1.0, 2.0))
        z = np.zeros(grid.n_nodes)
        cap.observe(FieldState(t=1.0, u=z, v=z, grid=grid))
        with pytest.raises(AccuracyError):
            cap.states()


class TestDecayFit:
    def test_exact_power_law(self):
        ts = np.linspace(2.0, 30.0, 40)
        fit = decay_fit(ts, 7.0 * ts**-2.0)
        assert fit.rate == pytest.approx(-2.0, abs=1e-9)
        assert fit.amplitude == pytest.approx(7.0, rel=1e-9)
        assert fit.max_log_residual < 1e-12

    def test_window_restriction(self):
        ts = np.linspace(1.0, 20.0, 50)
        ys = 3.0 * ts**-1.5
        ys[ts < 5.0] *= 10.0  # pollute early times
        fit = decay_fit(ts, ys, t_lo=5.0)
        assert fit.rate == pytest.approx(-1.5, abs=1e-9)

    def test_nonpositive_samples_dropped(self):
        ts = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        ys = np.array([1.0, 0.0, 0.5**2 * 9.0, 9.0 / 16.0, 9.0 / 25.0])
        fit = decay_fit(ts, 9.0 * ts**-2.0 * (ys > 0))
        assert fit.rate == pytest.approx(-2.0, abs=1e-9)

    def test_too_few_samples(self):
        with pytest.raises(ParameterError):
            decay_fit([1.0, 2.0], [1.0, 0.5])
