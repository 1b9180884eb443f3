"""Server-side async task registry.

Most mutating endpoints return a task id immediately; the task runs in the
background of simulated time and is polled via GET /tasks/{id}. Completed
tasks are retained for a configurable window of sim time, then purged.
"""

from ..errors import SfError
from ..eventlog import plain_time

RETENTION_SECONDS = 7 * 86400


class AsyncTask:
    def __init__(self, task_id: str, kind: str, owner: str, created):
        self.id = task_id
        self.kind = kind
        self.owner = owner
        self.state = "queued"  # queued|running|completed|failed
        self.result = None
        self.created = created
        self.finished = None
        self.poll = None  # callable returning (state, result) while running

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "state": self.state,
            "result": self.result,
            "created": plain_time(self.created),
            "finished": plain_time(self.finished) if self.finished is not None else None,
        }


class TaskRegistry:
    def __init__(self, clock, retention_seconds: int = RETENTION_SECONDS):
        self.clock = clock  # callable returning sim now
        self.retention = retention_seconds
        self.tasks: dict[str, AsyncTask] = {}
        self.purged: set[str] = set()
        self._counter = 0

    def create(self, kind: str, owner: str, run) -> AsyncTask:
        """Run `run` immediately; it returns either ("completed"|"failed",
        result) or ("running", poll_callable)."""
        self._counter += 1
        task = AsyncTask(f"task-{self._counter}", kind, owner, self.clock())
        self.tasks[task.id] = task
        task.state = "running"
        try:
            state, payload = run()
        except SfError as e:
            state, payload = "failed", {"code": e.code, "message": e.message}
        if state == "running":
            task.poll = payload
            self.pump_one(task)
        else:
            self._finish(task, state, payload)
        return task

    def _finish(self, task: AsyncTask, state: str, result):
        task.state = state
        task.result = result
        task.finished = self.clock()
        task.poll = None

    def pump_one(self, task: AsyncTask):
        if task.state == "running" and task.poll is not None:
            state, result = task.poll()
            if state != "running":
                self._finish(task, state, result)

    def pump(self):
        now = self.clock()
        for task in list(self.tasks.values()):
            self.pump_one(task)
            if task.finished is not None and now - task.created > self.retention:
                self.purged.add(task.id)
                del self.tasks[task.id]

    def get(self, task_id: str, owner: str) -> AsyncTask:
        self.pump()
        task = self.tasks.get(task_id)
        if task is None:
            if task_id in self.purged:
                raise SfError("task-expired", f"task {task_id} was purged")
            raise SfError("task-not-found", f"no task {task_id}")
        if task.owner != owner:
            # no existence leak across users
            raise SfError("task-not-found", f"no task {task_id}")
        return task
