"""Shared fixtures: hand-built tiny scenarios and generated defaults."""

import numpy as np
import pytest

from msfedl.scenario import (GHZ, MB, LearningGlobals, NetworkProfile,
                             Scenario, ServiceProfile, UEProfile,
                             generate_scenario)


def make_scenario(n_ues=3, n_services=2, *,
                  distances=None, gains=None, cpu_totals=None,
                  data_sizes=None, update_sizes=None, cycles=None,
                  thetas=None, kappas=None, tx_power=10.0,
                  capacitance=2e-28, cpu_min=0.1 * GHZ,
                  bandwidth_min=0.001, learning=None, seed=0):
    """Build a fully explicit scenario (no randomness unless passed in)."""
    distances = distances if distances is not None else [10.0] * n_ues
    gains = gains if gains is not None else [1e-8] * n_ues
    cpu_totals = cpu_totals if cpu_totals is not None else [1.5 * GHZ] * n_ues
    update_sizes = update_sizes if update_sizes is not None \
        else [100e3 * 8 * (s + 1) for s in range(n_services)]
    cycles = cycles if cycles is not None else [50.0 + 20 * s for s in range(n_services)]
    thetas = thetas if thetas is not None else [0.07 - 0.01 * s for s in range(n_services)]
    kappas = kappas if kappas is not None else [0.2] * n_services
    if data_sizes is None:
        data_sizes = np.full((n_services, n_ues), 15 * MB)
    data_sizes = np.asarray(data_sizes, dtype=float)
    ues = tuple(
        UEProfile(id=n, distance=distances[n], channel_gain=gains[n],
                  tx_power=tx_power, cpu_total=cpu_totals[n],
                  capacitance=capacitance,
                  mem_overhead=(0.0,) * n_services,
                  comm_overhead=(0.0,) * n_services)
        for n in range(n_ues))
    services = tuple(
        ServiceProfile(id=s, update_size=update_sizes[s],
                       cycles_per_bit=cycles[s], local_accuracy=thetas[s],
                       tradeoff_weight=kappas[s],
                       data_sizes=tuple(float(d) for d in data_sizes[s]),
                       cpu_min=cpu_min)
        for s in range(n_services))
    return Scenario(network=NetworkProfile(), ues=ues, services=services,
                    learning=learning or LearningGlobals(),
                    bandwidth_min=bandwidth_min, seed=seed)


@pytest.fixture(scope="session")
def symmetric_scenario():
    """Identical UEs and identical services: optima must be equal splits."""
    return make_scenario(n_ues=4, n_services=2,
                         update_sizes=[200e3 * 8] * 2, cycles=[60.0] * 2,
                         thetas=[0.06] * 2)


@pytest.fixture(scope="session")
def small_scenario():
    """Generated default-config scenario at desk scale."""
    return generate_scenario(0, 8)


@pytest.fixture(scope="session")
def medium_scenario():
    return generate_scenario(3, 12)
