"""
Batch processing module: runs indexed work items on a thread pool.
"""
import logging
import threading
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait

logger = logging.getLogger(__name__)


class BatchCancelled(Exception):
    """Raised by run() when cancel() was called before all items finished."""


class BatchProcessor:
    """
    Class for running a batch of independent work items.

    Results always come back in item order, so any reduction done by the
    caller is independent of the number of workers.
    """
    def __init__(self, workers=1, progress_callback=None):
        """
        Args:
            workers (int): Maximum number of threads (1 runs inline)
            progress_callback (callable): Called as (percent:int, message:str)
        """
        self.workers = max(1, int(workers))
        self.progress_callback = progress_callback
        self.is_processing = False
        self._cancel_event = threading.Event()
        self._lock = threading.Lock()
        self._done = 0

    def run(self, func, items, label="item"):
        """
        Applies func to every item.

        Args:
            func (callable): Work function taking one item
            items (sequence): Work items
            label (str): Name used in progress messages

        Returns:
            list: func(item) for every item, in order

        Raises:
            BatchCancelled: If cancel() was requested
            Exception: The first exception raised by a work item
        """
        items = list(items)
        total = len(items)
        self.is_processing = True
        self._cancel_event.clear()
        self._done = 0
        try:
            if self.workers == 1 or total <= 1:
                results = []
                for item in items:
                    if self._cancel_event.is_set():
                        raise BatchCancelled(f"batch cancelled after {self._done} of {total}")
                    results.append(func(item))
                    self._item_finished(total, label)
                return results

            results = [None] * total

            def work(index):
                if self._cancel_event.is_set():
                    return
                results[index] = func(items[index])
                self._item_finished(total, label)

            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = [executor.submit(work, i) for i in range(total)]
                done, pending = wait(futures, return_when=FIRST_EXCEPTION)
                for future in done:
                    error = future.exception()
                    if error is not None:
                        self._cancel_event.set()
                        for other in pending:
                            other.cancel()
                        logger.error("Work item failed: %s", error)
                        raise error
            if self._cancel_event.is_set():
                raise BatchCancelled(f"batch cancelled after {self._done} of {total}")
            return results
        finally:
            self.is_processing = False

    def _item_finished(self, total, label):
        with self._lock:
            self._done += 1
            done = self._done
        if self.progress_callback:
            self.progress_callback(int(done * 100 / total), f"Processed {label} {done} of {total}")

    def cancel(self):
        """
        Cancels batch processing.

        Returns:
            bool: True if cancellation was initiated, False otherwise
        """
        if self.is_processing:
            self._cancel_event.set()
            return True
        return False
