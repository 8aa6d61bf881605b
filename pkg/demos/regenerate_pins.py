"""Recompute every pinned reference value used by configs and tests.

Run after an intentional change to sampling or numerics, compare the output
against the pinned constants (config ``expected`` blocks and the constants
at the top of tests/test_acceptance.py), and update them deliberately.
Takes several minutes at the full sample sizes.
"""
import numpy as np

from anderson_lab.estimators import lyapunov_mc
from anderson_lab.experiments import Scenario, run_localization, singularity_census
from anderson_lab.measures import BumpSchedule, FiniteAtoms, Identity, PowersOfTwoSites, ProductLaw
from anderson_lab.rng import RngStream
from anderson_lab.transfer import vector_growth_logs

bernoulli = FiniteAtoms(atoms=((-1.0, 0.5), (1.0, 0.5)))
law = ProductLaw.exact(bernoulli)

# Long single-trajectory reference for gamma at E = 0 (tests pin this),
# with a blocked standard error from 100 stretches of 1e5 steps.
burn = 64
blocks, block_len = 100, 100_000
steps = burn + blocks * block_len
gen = RngStream(123_457).generator()
window = np.empty((1, steps))
chunk = 1_000_000
for i in range(0, steps, chunk):
    m = min(chunk, steps - i)
    window[0, i : i + m] = np.where(gen.random(m) < 0.5, -1.0, 1.0)
marks = tuple(burn + k * block_len for k in range(blocks + 1))
logs = vector_growth_logs(0.0, window, marks)
increments = np.diff(logs[:, 0]) / block_len
gamma_long = float((logs[-1, 0] - logs[0, 0]) / (blocks * block_len))
se_long = float(np.std(increments, ddof=1) / np.sqrt(blocks))
print(f"long-trajectory gamma(0) over {blocks * block_len:.0e} steps: "
      f"{gamma_long!r} +- {se_long!r}")

# Batched estimate with its standard error, for the combined-error check.
est = lyapunov_mc(law, 0.0, 10_000, 200, RngStream(42))
print(f"batched gamma(0): {est.mean:.8f} +- {est.stderr:.2e}")

# Localization pass fractions and census thresholds at the shipped seeds.
e_grid = tuple(np.round(np.arange(-0.5, 0.51, 0.1), 10))
for label, densities in (
    ("exact", Identity()),
    ("bumps", BumpSchedule(sites=PowersOfTwoSites(), base=bernoulli, weights=(0.75, 0.25))),
):
    scenario = Scenario(
        scenario_id=f"pin_{label}", kind="localize", base=bernoulli,
        densities=densities, seed=90210, samples=1, e_grid=e_grid,
        n_grid=(10, 25, 40, 55, 70, 85, 100, 115, 130, 145),
        interval=(-0.5, 0.5), box=(-200, 199), gamma_n=1500, gamma_samples=200,
    )
    report = run_localization(scenario)
    census = singularity_census(scenario)
    print(
        f"{label}: pass_fraction={report.pass_fraction:.4f} "
        f"eigenfunctions={len(report.rows)} census_zero_from={census.zero_from}"
    )
