import itertools

import numpy as np
import pytest

from symswitch.errors import ConfigurationError, SpaceMismatchError
from symswitch.hilbert import (
    ATOMIC_LEVELS,
    MODES,
    ModeSpec,
    annihilator,
    atomic_transition,
    build_space,
    commutator,
    creator,
    number,
)


def test_default_space_has_sixteen_states(space):
    assert space.dim == 16
    assert space.photon_dim == 4
    assert space.photon_states == ((0, 0, 0), (0, 0, 1), (0, 1, 0), (1, 0, 0))


def test_basis_order_is_atom_major():
    sp = build_space()
    assert [b[0] for b in sp.basis] == [a for a in range(4) for _ in range(4)]
    assert ATOMIC_LEVELS == ("00", "s", "a", "11")
    assert MODES == ("l", "2", "r")


@pytest.mark.parametrize(
    "cutoffs,cap,dim",
    [((1, 1, 1), None, 32), ((2, 2, 2), 2, 40), ((2, 1, 1), 1, 16), ((3, 3, 3), None, 256)],
)
def test_dimension_counts(cutoffs, cap, dim):
    assert build_space(ModeSpec(cutoffs, cap)).dim == dim


def test_modespec_validation():
    with pytest.raises(ConfigurationError):
        ModeSpec((0, 1, 1))
    with pytest.raises(ConfigurationError):
        ModeSpec((1, 1, 1), 4)
    with pytest.raises(ConfigurationError):
        ModeSpec((1, 1))


def test_index_maps_are_inverse(space):
    for i, b in enumerate(space.basis):
        assert space.index[b] == i
    assert len(space.index) == space.dim


def test_build_space_deterministic():
    a, b = build_space(ModeSpec((2, 2, 2), 2)), build_space(ModeSpec((2, 2, 2), 2))
    assert a.basis == b.basis and a.space_id == b.space_id


def test_annihilator_matrix_elements(space):
    a2 = annihilator(space, "2")
    src = space.state_index("a", (0, 1, 0))
    dst = space.state_index("a", (0, 0, 0))
    assert a2.elements[dst, src] == 1.0
    assert np.count_nonzero(a2.elements) == 4  # one per atomic level


def test_sqrt_factor_with_higher_cutoff():
    sp = build_space(ModeSpec((2, 2, 2), None))
    al = annihilator(sp, "l")
    i2 = sp.state_index("00", (2, 0, 0))
    i1 = sp.state_index("00", (1, 0, 0))
    assert al.elements[i1, i2] == pytest.approx(np.sqrt(2), abs=0)


def test_canonical_commutator_below_cutoff():
    sp = build_space(ModeSpec((2, 2, 2), None))
    for mode in MODES:
        a = annihilator(sp, mode)
        c = commutator(a, creator(sp, mode)).elements
        k = MODES.index(mode)
        for i, b in enumerate(sp.basis):
            if b[1 + k] < 2:
                assert c[i, i] == pytest.approx(1.0, abs=1e-14)


def test_number_operator_diagonal():
    sp = build_space(ModeSpec((2, 2, 2), 2))
    n = number(sp, "r").elements
    assert np.allclose(np.diag(n).real, [b[3] for b in sp.basis])


def test_distinct_annihilators_commute_under_truncation():
    for spec in (ModeSpec(), ModeSpec((2, 2, 2), 2), ModeSpec((2, 1, 2), 3)):
        sp = build_space(spec)
        for m1, m2 in itertools.permutations(MODES, 2):
            assert commutator(annihilator(sp, m1), annihilator(sp, m2)).norm() < 1e-14


def test_mixed_pairs_commute_only_without_global_cap():
    sp = build_space(ModeSpec((1, 1, 1), None))
    for m1, m2 in itertools.permutations(MODES, 2):
        assert commutator(annihilator(sp, m1), creator(sp, m2)).norm() < 1e-14
    # the cap removes |1,1,0>, so a_l a_2^+ |1,0,0> vanishes while a_2^+ a_l |1,0,0> does not
    capped = build_space()
    assert commutator(annihilator(capped, "l"), creator(capped, "2")).norm() > 1


def test_atomic_transition_entries(space):
    for i, j in itertools.product(ATOMIC_LEVELS, repeat=2):
        e = atomic_transition(space, i, j).elements
        nz = e[np.nonzero(e)]
        assert nz.size == space.photon_dim
        assert np.all(nz == 1.0)


def test_space_mismatch_is_rejected(space):
    other = build_space(ModeSpec((2, 2, 2), 2))
    with pytest.raises(SpaceMismatchError):
        annihilator(space, "l") + annihilator(other, "l")
    with pytest.raises(SpaceMismatchError):
        annihilator(space, "l") @ annihilator(other, "l")


def test_operator_is_read_only(space):
    a = annihilator(space, "l")
    with pytest.raises(ValueError):
        a.elements[0, 0] = 1.0


def test_unknown_labels(space):
    with pytest.raises(ConfigurationError):
        annihilator(space, "x")
    with pytest.raises(ConfigurationError):
        atomic_transition(space, "t", "s")
    with pytest.raises(ConfigurationError):
        space.state_index("s", (1, 1, 0))
