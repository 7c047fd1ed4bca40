import threading

import pytest

from core.batch_processor import BatchCancelled, BatchProcessor


def test_results_keep_item_order():
    for workers in (1, 4):
        assert BatchProcessor(workers).run(lambda x: x * x, range(20)) == [x * x for x in range(20)]


def test_progress_reaches_one_hundred():
    calls = []
    BatchProcessor(3, lambda percent, message: calls.append((percent, message))).run(str, range(5), "chunk")
    assert len(calls) == 5
    assert max(p for p, _ in calls) == 100
    assert all(m.startswith("Processed chunk") for _, m in calls)


def test_first_failure_is_raised():
    def work(x):
        if x == 3:
            raise ArithmeticError("bad item")
        return x

    for workers in (1, 2):
        with pytest.raises(ArithmeticError):
            BatchProcessor(workers).run(work, range(6))


def test_cancel_stops_the_batch():
    processor = BatchProcessor(1)
    assert not processor.cancel()

    def work(x):
        if x == 1:
            processor.cancel()
        return x

    with pytest.raises(BatchCancelled):
        processor.run(work, range(5))
    assert not processor.is_processing


def test_worker_threads_are_used():
    names = set()
    lock = threading.Lock()
    barrier = threading.Barrier(2, timeout=5)

    def work(x):
        barrier.wait()
        with lock:
            names.add(threading.current_thread().name)
        return x

    assert BatchProcessor(2).run(work, range(2)) == [0, 1]
    assert len(names) == 2
