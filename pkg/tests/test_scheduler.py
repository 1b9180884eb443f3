import pytest

from sfbox.errors import SfError
from sfbox.facility import (Facility, Member, NodePool, OutageWindow, Project,
                            SystemDescriptor, SystemKind)
from sfbox.scheduler import JobSpec, Scheduler, SchedulerConfig


def make_sched(total_nodes=8, reserve=0, quantum=30, realtime_projects=None,
               allocation=1e9):
    fac = Facility()
    fac.register_system(SystemDescriptor(name="hpc", kind=SystemKind.COMPUTE),
                        NodePool(name="hpc", total_nodes=total_nodes,
                                 realtime_reserve=reserve))
    fac.add_project(Project(id="proj", allocation_node_hours=allocation,
                            members=[Member(user="pi", role="pi")]))
    fac.add_project(Project(id="other", allocation_node_hours=allocation,
                            members=[Member(user="opi", role="pi")]))
    sched = Scheduler(fac, "hpc", SchedulerConfig(
        quantum_seconds=quantum, realtime_projects=realtime_projects))
    return fac, sched


def spec(**kw):
    base = dict(project="proj", account="pi", qos="regular", nodes=1,
                walltime_limit=60)
    base.update(kw)
    return JobSpec(**base)


def run_ticks(fac, sched, upto, quantum=30):
    t = sched.last_tick + quantum if sched.last_tick is not None else 0
    while t <= upto:
        fac.apply_time(t)
        sched.tick(t)
        t += quantum


def test_priority_order_realtime_first():
    fac, sched = make_sched(total_nodes=1)
    regular = sched.submit(spec(qos="regular", walltime_limit=30, runtime_seconds=30))
    rt = sched.submit(spec(qos="realtime", walltime_limit=30, runtime_seconds=30))
    sched.tick(0)
    assert sched.jobs[rt].state == "running"
    assert sched.jobs[regular].state == "pending"


def test_backfill_does_not_delay_blocked_job():
    fac, sched = make_sched(total_nodes=4, quantum=10)
    wide = sched.submit(spec(nodes=4, walltime_limit=40, runtime_seconds=40))
    sched.tick(0)
    blocked = sched.submit(spec(nodes=4, walltime_limit=40))
    ok_fill = sched.submit(spec(nodes=1, walltime_limit=20))  # no idle nodes yet
    run_ticks(fac, sched, 40, quantum=10)
    # wide done at 40 -> blocked starts exactly at its projection
    assert sched.jobs[blocked].state == "running"
    assert sched.jobs[blocked].start_time == 40
    assert sched.jobs[wide].state == "completed"
    assert sched.jobs[ok_fill].state in ("pending", "running")


def test_backfill_fills_holes():
    fac, sched = make_sched(total_nodes=4, quantum=10)
    half = sched.submit(spec(nodes=2, walltime_limit=100, runtime_seconds=100))
    sched.tick(0)
    blocked = sched.submit(spec(nodes=4, walltime_limit=50))
    small = sched.submit(spec(nodes=2, walltime_limit=50, runtime_seconds=50))
    fac.apply_time(10)
    sched.tick(10)
    # small fits before the blocked job's projected start (100) and is backfilled
    assert sched.jobs[small].state == "running"
    assert sched.jobs[blocked].state == "pending"
    start_rec = [r for r in sched.log.records
                 if r["kind"] == "job_start" and r["job"] == small]
    assert start_rec[0]["backfill"] is True


def test_realtime_allowlist():
    fac, sched = make_sched(realtime_projects=["proj"])
    sched.submit(spec(qos="realtime"))  # allowed
    with pytest.raises(SfError) as e:
        sched.submit(spec(project="other", account="opi", qos="realtime"))
    assert e.value.code == "realtime-not-allowed"


def test_realtime_uses_reserve_pool():
    fac, sched = make_sched(total_nodes=8, reserve=2)
    filler = [sched.submit(spec(nodes=1, walltime_limit=600)) for _ in range(8)]
    rt = sched.submit(spec(qos="realtime", nodes=1, walltime_limit=60))
    sched.tick(0)
    # only 6 general nodes exist; the realtime job lands on a reserve node
    assert sched.jobs[rt].state == "running"
    assert sched.jobs[rt].assigned_nodes <= {6, 7}
    running_fillers = [j for j in filler if sched.jobs[j].state == "running"]
    assert len(running_fillers) == 6


def test_regular_jobs_keep_off_reserve_nodes():
    fac, sched = make_sched(total_nodes=4, reserve=2)
    jobs = [sched.submit(spec(nodes=1, walltime_limit=60)) for _ in range(4)]
    sched.tick(0)
    states = [sched.jobs[j].state for j in jobs]
    assert states.count("running") == 2  # only the general partition


def test_reservation_fences_nodes_and_owner_runs():
    fac, sched = make_sched(total_nodes=8, quantum=30)
    sched.tick(0)
    res = sched.create_reservation("shift", "proj", 4, start=60, end=600)
    assert len(res.nodes) == 4
    # a long regular job no longer fits before the fence on fenced nodes
    long_job = sched.submit(spec(nodes=8, walltime_limit=600))
    run_ticks(fac, sched, 60)
    assert sched.jobs[long_job].state == "pending"
    owner = sched.submit(spec(nodes=4, walltime_limit=120, runtime_seconds=60,
                              reservation="shift"))
    run_ticks(fac, sched, 90)
    assert sched.jobs[owner].state == "running"
    assert sched.jobs[owner].assigned_nodes == res.nodes


def test_reservation_requires_future_start():
    fac, sched = make_sched()
    sched.tick(0)
    fac.apply_time(30)
    sched.tick(30)
    with pytest.raises(SfError) as e:
        sched.create_reservation("r", "proj", 2, start=30, end=600)
    assert e.value.code == "reservation-infeasible"


def test_reservation_infeasible_reports_conflict_instant():
    fac, sched = make_sched(total_nodes=8)
    sched.tick(0)
    sched.create_reservation("a", "proj", 6, start=100, end=300)
    with pytest.raises(SfError) as e:
        sched.create_reservation("b", "other", 6, start=200, end=400)
    assert e.value.code == "reservation-infeasible"
    assert "t=200" in e.value.message


def test_non_owner_cannot_target_reservation():
    fac, sched = make_sched()
    sched.tick(0)
    sched.create_reservation("shift", "proj", 2, start=60, end=600)
    with pytest.raises(SfError) as e:
        sched.submit(spec(project="other", account="opi", reservation="shift"))
    assert e.value.code == "permission-denied"


def test_preemptible_filler_evicted_within_grace():
    fac, sched = make_sched(total_nodes=2, quantum=30)
    sched.tick(0)
    res = sched.create_reservation("shift", "proj", 2, start=30, end=600,
                                   allow_preemptible=True, grace_seconds=120)
    filler = sched.submit(spec(project="other", account="opi", qos="preemptible",
                               nodes=2, walltime_limit=900))
    run_ticks(fac, sched, 30)
    assert sched.jobs[filler].state == "running"
    assert sched.jobs[filler].assigned_nodes & res.nodes
    owner = sched.submit(spec(nodes=2, walltime_limit=120, runtime_seconds=90,
                              reservation="shift"))
    run_ticks(fac, sched, 60)
    assert sched.jobs[filler].state == "preempting"
    assert sched.jobs[filler].kill_at == 60 + 120
    run_ticks(fac, sched, 180)
    assert sched.jobs[filler].state == "preempted_killed"
    assert sched.jobs[owner].state == "running"
    assert sched.jobs[owner].start_time == 180  # notice + grace
    assert sched.grace_violations == 0


def test_requeue_on_preempt_reruns():
    fac, sched = make_sched(total_nodes=2, quantum=30)
    sched.tick(0)
    sched.create_reservation("shift", "proj", 2, start=30, end=240,
                             allow_preemptible=True, grace_seconds=30)
    filler = sched.submit(spec(project="other", account="opi", qos="preemptible",
                               nodes=2, walltime_limit=3000,
                               runtime_seconds=3000, requeue_on_preempt=True))
    run_ticks(fac, sched, 30)
    owner = sched.submit(spec(nodes=2, walltime_limit=60, runtime_seconds=60,
                              reservation="shift"))
    run_ticks(fac, sched, 240)
    assert sched.jobs[owner].state == "completed"
    assert sched.jobs[filler].state in ("running", "requeued")
    run_ticks(fac, sched, 300)
    assert sched.jobs[filler].state == "running"  # rerunning after the window


def test_outage_requeues_flagged_jobs_and_fails_others():
    fac, sched = make_sched(total_nodes=4, quantum=30)
    keep = sched.submit(spec(nodes=1, walltime_limit=600, runtime_seconds=600,
                             requeue_on_preempt=True))
    lose = sched.submit(spec(nodes=1, walltime_limit=600, runtime_seconds=600))
    sched.tick(0)
    fac.add_outage(OutageWindow(system="hpc", start=30, end=90))
    run_ticks(fac, sched, 30)
    assert sched.jobs[keep].state == "requeued"
    assert sched.jobs[lose].state == "failed"
    run_ticks(fac, sched, 120)
    assert sched.jobs[keep].state == "running"
    assert sched.jobs[keep].start_time == 90


def test_allocation_exhaustion_holds_jobs():
    fac, sched = make_sched(allocation=0.001)
    fac.charge_allocation("proj", 0.001)
    held = sched.submit(spec())
    assert sched.jobs[held].state == "held"


def test_completed_charge_matches_busy_time():
    fac, sched = make_sched(total_nodes=4, quantum=30)
    sched.submit(spec(nodes=3, walltime_limit=90, runtime_seconds=90))
    run_ticks(fac, sched, 120)
    # 3 nodes x 90 s = 270 node-seconds = 0.075 node-hours
    assert float(sched.charged_node_hours) == 270 / 3600
    assert fac.get_project("proj").used_node_hours == pytest.approx(0.075)


def test_cancel_pending_and_running():
    fac, sched = make_sched(total_nodes=2, quantum=30)
    a = sched.submit(spec(nodes=2, walltime_limit=600, runtime_seconds=600))
    b = sched.submit(spec(nodes=2, walltime_limit=600))
    sched.tick(0)
    sched.cancel(b)
    assert sched.jobs[b].state == "cancelled"
    sched.cancel(a)
    run_ticks(fac, sched, 30)
    assert sched.jobs[a].state == "cancelled"
    assert sched.jobs[a].end_time == 30


def test_out_of_order_tick_rejected():
    fac, sched = make_sched()
    sched.tick(0)
    with pytest.raises(SfError) as e:
        sched.tick(45)
    assert e.value.code == "out-of-order-tick"


def test_node_conservation_every_tick():
    fac, sched = make_sched(total_nodes=4, quantum=30)
    for _ in range(6):
        sched.submit(spec(nodes=2, walltime_limit=60, runtime_seconds=60))
    run_ticks(fac, sched, 300)  # check_conservation runs inside tick()
    assert all(sched.jobs[j].state == "completed" for j in sched.jobs)
