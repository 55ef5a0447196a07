import threading

from src.workers import map_blocks, map_ordered, resolve_threads, row_blocks


def test_row_blocks_cover_every_row():
    blocks = row_blocks(600, block_rows=256)
    assert [(b.start, b.stop) for b in blocks] == [(0, 256), (256, 512), (512, 600)]
    assert row_blocks(0) == []


def test_resolve_threads():
    assert resolve_threads(3) == 3
    assert resolve_threads(None) >= 1
    assert resolve_threads(0) >= 1


def test_map_ordered_keeps_input_order():
    items = list(range(40))
    assert map_ordered(lambda i: i * i, items, threads=4) == [i * i for i in items]


def test_single_thread_runs_inline():
    names = map_ordered(lambda _: threading.current_thread().name, [1, 2, 3], threads=1)
    assert set(names) == {threading.current_thread().name}


def test_map_blocks_independent_of_thread_count():
    def total(rows: slice) -> float:
        return sum(0.1 * i for i in range(rows.start, rows.stop))

    assert map_blocks(total, 1000, threads=1) == map_blocks(total, 1000, threads=8)
