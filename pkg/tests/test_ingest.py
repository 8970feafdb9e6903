import json
import math

import pytest

from n1screen.ingest import (
    BusType,
    DuplicateBusId,
    MalformedRecord,
    MissingSection,
    NoSlackBus,
    SchemaError,
    Severity,
    has_errors,
    load_network,
    network_to_json,
    parse_cdf,
    parse_json_network,
    validate_network,
)


def _minimal(**branch):
    br = {"id": 1, "from": 1, "to": 2, "r": 0.0, "x": 0.1}
    br.update(branch)
    return {
        "base_mva": 100,
        "buses": [
            {"id": 1, "type": "slack", "v_mag": 1.0},
            {"id": 2, "type": "pq", "p_load": 50.0, "q_load": 10.0},
        ],
        "branches": [br],
    }


class TestCdf:
    def test_ieee14_counts(self, model14):
        assert len(model14.buses) == 14
        assert len(model14.branches) == 20
        assert sum(b.bus_type is BusType.SLACK for b in model14.buses) == 1
        assert model14.base_mva == 100.0

    def test_ieee118_counts(self, model118):
        assert len(model118.buses) == 118
        assert len(model118.branches) == 186
        assert model118.slack.id == 69

    def test_units_converted(self, model14):
        bus2 = model14.buses[model14.bus_index()[2]]
        # 40 MW generation and 21.7 MW load on a 100 MVA base
        assert bus2.p_gen == pytest.approx(0.4)
        assert bus2.p_load == pytest.approx(0.217)
        assert bus2.v_ang == pytest.approx(math.radians(-4.98))
        assert bus2.bus_type is BusType.PV

    def test_taps_and_shunt(self, model14):
        taps = sorted(br.tap for br in model14.branches if br.tap != 1.0)
        assert taps == pytest.approx([0.932, 0.969, 0.978])
        bus9 = model14.buses[model14.bus_index()[9]]
        assert bus9.b_shunt == pytest.approx(0.19)

    def test_parallel_circuits_kept(self, model118):
        pairs = [(br.from_bus, br.to_bus) for br in model118.branches]
        assert pairs.count((42, 49)) == 2
        assert pairs.count((49, 66)) == 2

    def test_branch_ids_are_ordinals(self, model14):
        assert [br.id for br in model14.branches] == list(range(1, 21))

    def test_missing_branch_section(self, data_dir):
        text = (data_dir / "ieee14.cdf").read_text()
        cut = text[: text.index("BRANCH DATA FOLLOWS")]
        with pytest.raises(MissingSection):
            parse_cdf(cut)

    def test_malformed_number(self, data_dir):
        lines = (data_dir / "ieee14.cdf").read_text().splitlines()
        k = next(i for i, ln in enumerate(lines) if ln.startswith("BUS DATA")) + 3
        lines[k] = lines[k][:40] + "  abc.de" + lines[k][48:]
        with pytest.raises(MalformedRecord) as exc:
            parse_cdf("\n".join(lines))
        assert exc.value.line == k + 1

    def test_duplicate_bus(self, data_dir):
        lines = (data_dir / "ieee14.cdf").read_text().splitlines()
        k = next(i for i, ln in enumerate(lines) if ln.startswith("BUS DATA")) + 1
        lines.insert(k + 1, lines[k])
        with pytest.raises(DuplicateBusId):
            parse_cdf("\n".join(lines))

    def test_no_slack(self, data_dir):
        lines = (data_dir / "ieee14.cdf").read_text().splitlines()
        k = next(i for i, ln in enumerate(lines) if ln.startswith("BUS DATA")) + 1
        ln = lines[k]
        lines[k] = ln[:24] + " 2" + ln[26:]
        with pytest.raises(NoSlackBus):
            parse_cdf("\n".join(lines))


class TestJson:
    def test_minimal_two_bus(self):
        model = parse_json_network(json.dumps(_minimal()))
        assert len(model.buses) == 2 and len(model.branches) == 1
        assert model.buses[1].p_load == pytest.approx(0.5)

    def test_p_gen_per_unit(self):
        doc = _minimal()
        doc["buses"][1]["p_gen"] = 50.0
        assert parse_json_network(json.dumps(doc)).buses[1].p_gen == pytest.approx(0.5)

    def test_unknown_bus_path(self):
        with pytest.raises(SchemaError) as exc:
            parse_json_network(json.dumps(_minimal(to=99)))
        assert exc.value.path == "branches[0].to"

    def test_missing_reactance(self):
        doc = _minimal()
        del doc["branches"][0]["x"]
        with pytest.raises(SchemaError) as exc:
            parse_json_network(json.dumps(doc))
        assert exc.value.path == "branches[0].x"

    def test_mistyped_value(self):
        doc = _minimal()
        doc["buses"][0]["v_mag"] = "1.0"
        with pytest.raises(SchemaError) as exc:
            parse_json_network(json.dumps(doc))
        assert exc.value.path == "buses[0].v_mag"

    def test_roundtrip_through_json(self, model14):
        back = parse_json_network(network_to_json(model14))
        assert back.case_name == model14.case_name
        for a, b in zip(model14.buses, back.buses):
            assert a.id == b.id and a.bus_type is b.bus_type
            for key in ("v_mag", "v_ang", "p_load", "q_load", "p_gen", "q_gen", "b_shunt"):
                assert getattr(b, key) == pytest.approx(getattr(a, key), abs=1e-12)
        assert [(br.from_bus, br.to_bus, br.x, br.tap) for br in back.branches] == [
            (br.from_bus, br.to_bus, br.x, br.tap) for br in model14.branches
        ]

    def test_docs_example_loads(self, data_dir):
        model = load_network(data_dir.parent.parent / "docs" / "five_bus.json")
        assert len(model.buses) == 5
        assert not has_errors(validate_network(model))


class TestValidate:
    def test_ieee14_has_no_errors(self, model14):
        diags = validate_network(model14)
        assert not has_errors(diags)
        # the archived file carries no MVA ratings: one warning per branch
        assert {d.code for d in diags} == {"ZeroRating"}
        assert len(diags) == 20

    def test_two_slacks(self):
        doc = _minimal()
        doc["buses"][1]["type"] = "slack"
        diags = validate_network(parse_json_network(json.dumps(doc)))
        assert [(d.severity, d.code) for d in diags if d.severity is Severity.ERROR] == [
            (Severity.ERROR, "MultipleSlack")
        ]

    def test_zero_reactance(self):
        diags = validate_network(parse_json_network(json.dumps(_minimal(x=0.0, rating_mva=100))))
        assert [(d.code, d.ref) for d in diags] == [("ZeroReactance", 1)]

    def test_self_loop_and_isolated(self):
        diags = validate_network(parse_json_network(json.dumps(_minimal(to=1, rating_mva=100))))
        codes = {d.code for d in diags}
        assert "SelfLoop" in codes and "IsolatedBus" in codes
