import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jointcrf.labels import RoleKind, RoleLabel, Scheme, build_label_space
from jointcrf.synth import SynthWorld, sample_corpus
from jointcrf.training import TrainConfig, train

DATA = Path(__file__).parent / "data"


def role(scheme, name, kind=RoleKind.CORE):
    return RoleLabel(scheme, name, kind)


def make_inventory(scheme, args=(), modifiers=()):
    inv = [role(scheme, "V", RoleKind.VERB), role(scheme, "OUT", RoleKind.OUTSIDE)]
    inv += [role(scheme, a) for a in args]
    inv += [role(scheme, m, RoleKind.MODIFIER) for m in modifiers]
    return tuple(inv)


@pytest.fixture(scope="session")
def space2():
    """Degenerate space: {(O, O), (Verb, Verb)}."""
    return build_label_space(make_inventory(Scheme.VN), make_inventory(Scheme.PB))


@pytest.fixture(scope="session")
def space4():
    return build_label_space(
        make_inventory(Scheme.VN, args=("Agent",)), make_inventory(Scheme.PB))


@pytest.fixture(scope="session")
def space6():
    return build_label_space(
        make_inventory(Scheme.VN, args=("Agent",)),
        make_inventory(Scheme.PB, args=("Arg0",)),
        {("Agent", "Arg0")},
    )


@pytest.fixture(scope="session")
def space8():
    return build_label_space(
        make_inventory(Scheme.VN, args=("Theme",)),
        make_inventory(Scheme.PB, args=("Arg1",)),
    )


@pytest.fixture(scope="session")
def world():
    return SynthWorld()


@pytest.fixture(scope="session")
def synth_train(world):
    return sample_corpus(world, 300, seed=101)


@pytest.fixture(scope="session")
def synth_dev(world):
    return sample_corpus(world, 100, seed=202, start_index=10_000)


@pytest.fixture(scope="session")
def trained_model(world, synth_train):
    """The learning-recovery model shared by the acceptance criteria."""
    config = TrainConfig(regime="joint", epochs=20, step_size=0.5, l2=1e-4,
                         hash_dim=2 ** 14, batch_size=8, seed=0)
    return train(synth_train, config, world.space, world.mapping)


def random_lattice(space, T, rng, scale=2.0):
    from jointcrf.crf import make_lattice

    L = len(space)
    return make_lattice(
        space,
        rng.uniform(-scale, scale, size=(T, L)),
        rng.uniform(-scale, scale, size=(L, L)),
        rng.uniform(-scale, scale, size=L),
        rng.uniform(-scale, scale, size=L),
    )


def random_feasible_mask(lattice, rng, p=0.8):
    """Random constraint mask with at least one oracle-valid path."""
    import reference

    T, L = lattice.emissions.shape
    while True:
        mask = rng.random((T, L)) < p
        if reference.has_valid_path(lattice, mask):
            return mask
