import numpy as np
import pytest

from vacuumsq import NoiseModel, SystemParams, derive_params


@pytest.fixture(scope="session")
def fig3a_params():
    """The eta=10 working point: N=1e4, kappa/2pi=100 kHz, Gamma/2pi=7 mHz,
    Delta/2pi=11.2 MHz, g fixed implicitly by the cooperativity."""
    return SystemParams.from_frequencies(
        10_000, kappa_hz=1e5, gamma_hz=7e-3, delta_hz=11.2e6, eta=10.0)


@pytest.fixture(scope="session")
def fig3a_derived(fig3a_params):
    return derive_params(fig3a_params)


@pytest.fixture(scope="session")
def full_noise():
    return NoiseModel(include_free_space=True, include_cavity_leak=True)


def small_params(n_atoms, omega_twist=1.0):
    """Params whose twisting rate is exactly ``omega_twist`` rad/s."""
    delta = 4.0 / omega_twist
    return SystemParams(n_atoms=n_atoms, coupling_g=2.0, kappa=0.0, gamma=0.0,
                        delta=delta)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260809)
