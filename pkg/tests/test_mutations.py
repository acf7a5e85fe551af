import pytest

from bsnassure.mutations import MUTATIONS, MutationError, delay_processing, mutate_for
from bsnassure.selftest import load_scenario
from bsnassure.simulator import run_simulation
from bsnassure.trace import Event, Trace, dumps, loads
from bsnassure.verifier import Verdict, check_property


@pytest.fixture(scope="module", params=[6, 8, 21])
def nominal(request):
    return run_simulation(load_scenario("nominal_5").replace(seed=request.param))


@pytest.mark.parametrize("pid", sorted(MUTATIONS, key=lambda p: int(p[1:])))
def test_mutation_flips_with_exact_witness(nominal, pid):
    assert check_property(nominal, pid).verdict is Verdict.SATISFIED
    mutated, index = mutate_for(nominal, pid)
    v = check_property(loads(dumps(mutated)), pid)
    assert v.verdict is Verdict.VIOLATED
    assert v.witness[0] == index


@pytest.mark.parametrize("pid", ["P2", "P7", "P8", "P10"])
def test_single_snapshot_edit(nominal, pid):
    mutated, index = mutate_for(nominal, pid)
    diff = [i for i, (a, b) in enumerate(zip(nominal, mutated)) if a != b]
    assert len(mutated) == len(nominal) and diff == [index]


def test_delay_relocates_one_snapshot(nominal):
    mutated, index = delay_processing(nominal)
    moved = mutated[index]
    assert moved.event is Event.PROCESSED
    rest = [s for i, s in enumerate(mutated) if i != index]
    original = list(nominal)
    removed = [s for s in original if s not in rest]
    assert len(removed) == 1 and removed[0]._replace(time=moved.time, cycle=moved.cycle) == moved
    times = [s.time for s in mutated]
    assert times == sorted(times)


def test_unknown_and_impossible_mutations():
    with pytest.raises(MutationError):
        mutate_for(Trace("x", []), "P5")
    with pytest.raises(MutationError):
        mutate_for(Trace("x", []), "P2")
