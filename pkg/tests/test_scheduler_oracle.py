"""Cross-validation of the placement engine against an independent oracle.

The oracle reimplements conservative backfill from scratch on a 1-second
clock using only release-time multisets (no node identities, no engine
code paths): greedy priority placement until the first job blocks, then a
candidate is backfilled only if a recomputed projection for the blocked job
has not worsened. Engine and oracle must agree on every start time.
"""

import random
from collections import defaultdict

from sfbox.facility import (Facility, Member, NodePool, Project,
                            SystemDescriptor, SystemKind)
from sfbox.scheduler import JobSpec, Scheduler, SchedulerConfig


# -- independent oracle -------------------------------------------------------

def oracle_schedule(total_nodes: int, jobs: list[dict]) -> dict[int, int]:
    """jobs: [{submit, nodes, walltime, runtime}] -> {index: start_time}."""
    order = sorted(range(len(jobs)), key=lambda i: (jobs[i]["submit"], i))
    starts: dict[int, int] = {}
    running: list[tuple[int, int]] = []  # (job index, start)
    horizon = max((j["submit"] for j in jobs), default=0) + \
        sum(j["walltime"] for j in jobs) + 1

    def kth_release(t, running_now, idle_now, k):
        rel = [t] * idle_now
        for i, s in running_now:
            rel.extend([max(t, s + jobs[i]["walltime"])] * jobs[i]["nodes"])
        if len(rel) < k:
            return None
        rel.sort()
        return rel[k - 1]

    for t in range(horizon + 1):
        running = [(i, s) for i, s in running if s + jobs[i]["runtime"] > t]
        idle = total_nodes - sum(jobs[i]["nodes"] for i, s in running)
        blocked = None
        shadow = None
        for i in order:
            if i in starts or jobs[i]["submit"] > t:
                continue
            need = jobs[i]["nodes"]
            if blocked is None:
                if need <= idle:
                    starts[i] = t
                    running.append((i, t))
                    idle -= need
                else:
                    blocked = i
                    shadow = kth_release(t, running, idle, need)
            else:
                if need > idle:
                    continue
                new_shadow = kth_release(t, running + [(i, t)], idle - need,
                                         jobs[blocked]["nodes"])
                if shadow is not None and new_shadow is not None and new_shadow <= shadow:
                    starts[i] = t
                    running.append((i, t))
                    idle -= need
        if len(starts) == len(jobs):
            break
    return starts


def fifo_schedule(total_nodes: int, jobs: list[dict]) -> dict[int, int]:
    """Strict FCFS without backfill (a coarser baseline)."""
    order = sorted(range(len(jobs)), key=lambda i: (jobs[i]["submit"], i))
    starts: dict[int, int] = {}
    running: list[tuple[int, int]] = []
    horizon = max((j["submit"] for j in jobs), default=0) + \
        sum(j["walltime"] for j in jobs) + 1
    for t in range(horizon + 1):
        running = [(i, s) for i, s in running if s + jobs[i]["runtime"] > t]
        idle = total_nodes - sum(jobs[i]["nodes"] for i, s in running)
        for i in order:
            if i in starts or jobs[i]["submit"] > t:
                continue
            if jobs[i]["nodes"] <= idle:
                starts[i] = t
                running.append((i, t))
                idle -= jobs[i]["nodes"]
            else:
                break  # no backfill: the head of the queue blocks everyone
    return starts


# -- engine driver ------------------------------------------------------------

def engine_schedule(total_nodes: int, jobs: list[dict]) -> dict[int, int]:
    fac = Facility()
    fac.register_system(SystemDescriptor(name="hpc", kind=SystemKind.COMPUTE),
                        NodePool(name="hpc", total_nodes=total_nodes))
    fac.add_project(Project(id="p", allocation_node_hours=1e9,
                            members=[Member(user="u", role="pi")]))
    sched = Scheduler(fac, "hpc", SchedulerConfig(quantum_seconds=1))
    by_t = defaultdict(list)
    for idx, j in enumerate(jobs):
        by_t[j["submit"]].append(idx)
    ids: dict[int, int] = {}
    horizon = max((j["submit"] for j in jobs), default=0) + \
        sum(j["walltime"] for j in jobs) + 1
    for t in range(horizon + 1):
        fac.apply_time(t)
        for idx in by_t.get(t, []):
            j = jobs[idx]
            ids[idx] = sched.submit(JobSpec(
                project="p", account="u", qos="regular", nodes=j["nodes"],
                walltime_limit=j["walltime"], runtime_seconds=j["runtime"],
                submit_time=t))
        sched.tick(t)
        if all(sched.jobs[jid].start_time is not None for jid in ids.values()) \
                and len(ids) == len(jobs):
            break
    return {idx: sched.jobs[jid].start_time for idx, jid in ids.items()}


def check_instance(total_nodes: int, jobs: list[dict]):
    got = engine_schedule(total_nodes, jobs)
    want = oracle_schedule(total_nodes, jobs)
    assert got == want, f"pool={total_nodes} jobs={jobs}: engine={got} oracle={want}"
    return got


# -- test cases ----------------------------------------------------------------

def test_exhaustive_small_instances():
    """Every 3-job instance over nodes 1..4, walltimes 1..3, and a staggered
    second submit on a 4-node pool."""
    combos = [(n, w) for n in range(1, 5) for w in range(1, 4)]
    for n0, w0 in combos:
        for n1, w1 in combos:
            for n2, w2 in combos:
                for s1 in (0, 1):
                    jobs = [
                        {"submit": 0, "nodes": n0, "walltime": w0, "runtime": w0},
                        {"submit": s1, "nodes": n1, "walltime": w1, "runtime": w1},
                        {"submit": s1, "nodes": n2, "walltime": w2, "runtime": w2},
                    ]
                    check_instance(4, jobs)


def test_random_instances_match_oracle():
    rng = random.Random(12345)
    for _ in range(500):
        count = rng.randint(4, 6)
        jobs = []
        for _ in range(count):
            walltime = rng.randint(1, 10)
            jobs.append({
                "submit": rng.randint(0, 10),
                "nodes": rng.randint(1, 8),
                "walltime": walltime,
                "runtime": rng.randint(1, walltime),
            })
        starts = check_instance(8, jobs)
        # sanity invariants: starts respect submits and node capacity
        for idx, start in starts.items():
            assert start >= jobs[idx]["submit"]
        events = sorted(t for idx, s in starts.items()
                        for t in (s, s + jobs[idx]["runtime"]))
        for t in events:
            used = sum(jobs[idx]["nodes"] for idx, s in starts.items()
                       if s <= t < s + jobs[idx]["runtime"])
            assert used <= 8


def test_backfill_never_beats_oracle_blocked_start_and_helps_vs_fifo():
    """On instances with a clear hole, backfill starts the small job earlier
    than strict FCFS while the blocked job starts no later."""
    jobs = [
        {"submit": 0, "nodes": 2, "walltime": 10, "runtime": 10},
        {"submit": 0, "nodes": 4, "walltime": 10, "runtime": 10},  # blocks
        {"submit": 0, "nodes": 2, "walltime": 5, "runtime": 5},   # fits the hole
    ]
    easy = check_instance(4, jobs)
    fifo = fifo_schedule(4, jobs)
    assert easy[2] < fifo[2]          # the small job was backfilled
    assert easy[1] <= fifo[1]          # without delaying the blocked job
