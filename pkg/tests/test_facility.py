import pytest

from sfbox.errors import SfError
from sfbox.facility import (Facility, Member, NodePool, OutageWindow, Project,
                            SystemDescriptor, SystemKind, SystemState)


def make_facility() -> Facility:
    fac = Facility()
    fac.register_system(SystemDescriptor(name="hpc", kind=SystemKind.COMPUTE),
                        NodePool(name="hpc", total_nodes=4))
    fac.register_system(SystemDescriptor(name="portal", kind=SystemKind.SERVICE))
    fac.add_project(Project(id="proj", allocation_node_hours=10.0,
                            members=[Member(user="pi", role="pi"),
                                     Member(user="bob", role="member")]))
    return fac


def test_compute_requires_pool():
    fac = Facility()
    with pytest.raises(SfError) as e:
        fac.register_system(SystemDescriptor(name="x", kind=SystemKind.COMPUTE))
    assert e.value.code == "schema-violation"


def test_duplicate_system_rejected():
    fac = make_facility()
    with pytest.raises(SfError) as e:
        fac.register_system(SystemDescriptor(name="hpc", kind=SystemKind.COMPUTE),
                            NodePool(name="hpc", total_nodes=4))
    assert e.value.code == "duplicate-name"


def test_state_change_idempotent_history():
    fac = make_facility()
    fac.set_system_state("portal", SystemState.DOWN)
    fac.set_system_state("portal", SystemState.DOWN)
    entries = [h for h in fac.status_history if h["system"] == "portal"]
    assert len(entries) == 2  # registration + one transition


def test_outage_calendar_applies_and_restores():
    fac = make_facility()
    fac.add_outage(OutageWindow(system="hpc", start=100, end=200, kind="scheduled"))
    fac.apply_time(100)
    assert fac.systems["hpc"].state == SystemState.MAINTENANCE
    fac.apply_time(200)
    assert fac.systems["hpc"].state == SystemState.UP


def test_unplanned_outage_goes_down():
    fac = make_facility()
    fac.add_outage(OutageWindow(system="hpc", start=50, end=80, kind="unplanned"))
    fac.apply_time(50)
    assert fac.systems["hpc"].state == SystemState.DOWN


def test_services_kept_up_matrix():
    fac = make_facility()
    w = OutageWindow(system="portal", start=10, end=20, services_kept_up={"portal"})
    fac.add_outage(w)
    fac.apply_time(10)
    assert fac.systems["portal"].state == SystemState.UP


def test_manual_down_not_auto_restored_by_calendar():
    fac = make_facility()
    fac.add_outage(OutageWindow(system="hpc", start=10, end=20))
    fac.apply_time(30)  # past the window
    fac.set_system_state("hpc", SystemState.DOWN)  # unrelated manual action
    fac.apply_time(40)
    assert fac.systems["hpc"].state == SystemState.DOWN


def test_allocation_charge_and_exhaustion():
    fac = make_facility()
    assert fac.charge_allocation("proj", 6.0) == 4.0
    with pytest.raises(SfError) as e:
        fac.charge_allocation("proj", 5.0)
    assert e.value.code == "exhausted-allocation"
    # work already performed is always charged
    fac.charge_allocation("proj", 5.0, force=True)
    assert fac.allocation_exhausted("proj")


def test_membership_rules():
    fac = make_facility()
    fac.modify_membership("proj", "carol", "add")
    assert "carol" in fac.get_project("proj").member_ids()
    with pytest.raises(SfError) as e:
        fac.modify_membership("proj", "pi", "remove")
    assert e.value.code == "sole-pi-removal"
    fac.modify_membership("proj", "bob", "set_role", role="pi")
    assert fac.get_project("proj").pi() == "bob"
    fac.modify_membership("proj", "pi", "remove")  # no longer the pi


def test_snapshot_round_trip():
    fac = make_facility()
    fac.add_outage(OutageWindow(system="hpc", start=100, end=200))
    fac.charge_allocation("proj", 2.5)
    fac.apply_time(42)
    doc = fac.export_state()
    restored = Facility.import_state(doc)
    assert restored.export_state() == doc
    assert restored.now == 42
    assert restored.get_project("proj").used_node_hours == 2.5


def test_snapshot_version_check():
    with pytest.raises(SfError) as e:
        Facility.import_state({"snapshot_version": 99})
    assert e.value.code == "stale-state"
