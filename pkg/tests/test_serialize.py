import json
from fractions import Fraction as F

import pytest

from towerdyn.lp_operator import SimpleFunction
from towerdyn.measure_core import DyadicSet, StepFunction
from towerdyn.serialize import (
    DescriptorError,
    dumps,
    leveled_from_json,
    leveled_to_json,
    load_system,
    seq_from_csv,
    seq_to_csv,
    sequences_from_csv,
    sequences_to_csv,
    simple_from_json,
    simple_to_json,
    system_from_descriptor,
    system_to_descriptor,
    to_jsonable,
)
from towerdyn.tower import LeveledSet, bdp_system, custom_system, geometric_system


def test_rationals_and_sets():
    assert to_jsonable(F(3, 4)) == "3/4"
    assert to_jsonable(F(2)) == "2/1"
    assert to_jsonable(DyadicSet.from_text("0:1/2")) == "0:1/2"
    with pytest.raises(TypeError):
        to_jsonable(0.5)


def test_leveled_round_trip():
    s = LeveledSet({3: DyadicSet.interval(0, F(1, 2)), -1: DyadicSet.unit()})
    assert leveled_to_json(s) == {"-1": "0:1", "3": "0:1/2"}
    assert leveled_from_json(leveled_to_json(s)) == s
    with pytest.raises(DescriptorError) as e:
        leveled_from_json({"x": "0:1"})
    assert e.value.field == "set.x"
    with pytest.raises(DescriptorError):
        leveled_from_json({"0": "0:1/3"})


def test_simple_function_round_trip():
    phi = SimpleFunction([(0, DyadicSet.unit(), F(1, 2)), (4, DyadicSet.from_text("1/4:1/2"), -3)])
    doc = simple_to_json(phi)
    assert doc[0] == {"level": 0, "set": "0:1", "coeff": "1/2"}
    assert simple_from_json(json.loads(json.dumps(doc))) == phi
    with pytest.raises(DescriptorError) as e:
        simple_from_json([{"level": 0, "set": "0:1"}])
    assert e.value.field == "phi[0]"
    with pytest.raises(DescriptorError) as e:
        simple_from_json([{"level": 0, "set": "0:1", "coeff": 0.5}])
    assert e.value.field == "phi[0].coeff"


def test_system_descriptors_round_trip(tmp_path):
    d = StepFunction.from_pieces([(0, F(1, 2), 2), (F(1, 2), 1, F(1, 2))])
    systems = [
        bdp_system(),
        geometric_system(F(3, 4)),
        custom_system("c", {2: d}, default=F(1, 3)),
    ]
    for sys in systems:
        doc = system_to_descriptor(sys)
        path = tmp_path / f"{sys.kind}.json"
        path.write_text(json.dumps(doc))
        back = load_system(path)
        assert back.kind == sys.kind
        assert all(back.density(p) == sys.density(p) for p in range(-5, 30))
        assert system_to_descriptor(back) == doc


def test_custom_default_rule():
    sys = system_from_descriptor(
        {"kind": "custom", "name": "g", "parameters": {"default": {"rho": "1/2"}}, "densities": {"0": "2"}}
    )
    assert sys.level_measure(0) == 2
    assert sys.level_measure(-3) == F(1, 8)
    assert system_to_descriptor(sys)["parameters"]["default"] == {"rho": "1/2"}


@pytest.mark.parametrize(
    "doc,field",
    [
        ({"kind": "torus"}, "kind"),
        ({"kind": "geometric", "parameters": {}}, "parameters.rho"),
        ({"kind": "geometric", "parameters": {"rho": "3/2"}}, "parameters.rho"),
        ({"kind": "custom", "densities": {"1": [["0", "1/2", "1"]]}}, "densities.1"),
        ({"kind": "custom", "densities": {"1": "-1"}}, "densities.1"),
        ({"kind": "custom", "parameters": {"default": "0"}}, "parameters.default"),
        ([], "system"),
    ],
)
def test_descriptor_errors_name_the_field(doc, field):
    with pytest.raises(DescriptorError) as e:
        system_from_descriptor(doc)
    assert e.value.field == field


def test_csv_round_trips():
    rows = [(0, F(1), "mu"), (3, F(5, 4), "mu"), (1, F(1, 16), "defect_fwd")]
    text = sequences_to_csv(rows)
    assert text.splitlines()[0] == "n,value_num,value_den,tag"
    assert text.splitlines()[2] == "3,5,4,mu"
    assert sequences_from_csv(text) == rows
    seq = {-1: F(1, 2), 0: F(2), 5: F(7, 3)}
    assert seq_to_csv(seq).splitlines()[0] == "index,num,den"
    assert seq_from_csv(seq_to_csv(seq)) == seq
    with pytest.raises(DescriptorError):
        seq_from_csv("a,b\n1,2\n")


def test_dumps_is_stable():
    obj = {"b": F(1, 3), "a": [LeveledSet.single(0)], 1: True}
    assert dumps(obj) == dumps(dict(reversed(list(obj.items()))))
