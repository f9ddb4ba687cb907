"""
Saves in-progress training state when a job is asked to stop (SIGTERM from a
scheduler or a timeout) so the next launch resumes from the partial checkpoint.
"""

import sys
import signal
import logging
from typing import Any, Callable, List

logger = logging.getLogger(__name__)

Callback = Callable[[], Any]

class TimeoutHandler:
    def __init__(self, signals=(signal.SIGTERM, )):
        self._todos: List[Callback] = []
        self._times_received = 0
        for sig in signals:
            signal.signal(sig, self._handler)

    def before_cancel(self, todo: Callback):
        self._todos.append(todo)

    def _handler(self, sig, frame):
        self._times_received += 1
        logger.info(f'Received preemption signal. Times: {self._times_received}')

        # a second signal means the save itself is taking too long
        if self._times_received > 1:
            sys.exit(130)

        for todo in self._todos:
            try:
                todo()
            except Exception as e:
                logger.error(f'failed to run preemption callback: {e}')

        logger.info('Exiting gracefully now')
        sys.exit()
