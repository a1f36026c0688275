import time
import orjson
import pytest
import asyncio
import numpy as np
from pathlib import Path


def square(arg, offset=0):
    return arg * arg + offset


def fail_on_three(arg):
    if arg == 3:
        raise ValueError("three")
    return arg


@pytest.mark.asyncio
async def test_helpers(temp_dir):
    # sanitize_filename
    from ymmodel.helpers import sanitize_filename

    assert sanitize_filename("g^2 * (0,1,0,0)") == "g-2-0-1-0-0"
    assert sanitize_filename("lift / 1") == "lift-1"

    # task_pool
    from ymmodel.helpers import task_pool

    async def test_fn(arg):
        await asyncio.sleep(1)
        return arg

    results = []
    start_time = time.time()
    async for result in task_pool(test_fn, list(range(30))):
        results.append(result)
    elapsed = time.time() - start_time
    assert 2.5 < elapsed < 3.5
    assert len(results) == 30
    assert sorted(results) == list((i, i) for i in range(30))

    # failed tasks are dropped
    async def fail_fn(arg):
        if arg % 2:
            raise ValueError(arg)
        return arg

    results = [r async for r in task_pool(fail_fn, range(6), threads=3)]
    assert sorted(results) == [(0, 0), (2, 2), (4, 4)]

    # run_samples keeps argument order
    from ymmodel.errors import ModelError
    from ymmodel.helpers import run_samples

    assert await run_samples(square, range(5), workers=1, offset=1) == [1, 2, 5, 10, 17]
    assert await run_samples(square, range(8), workers=2) == [i * i for i in range(8)]
    with pytest.raises(ModelError):
        await run_samples(fail_on_three, range(5), workers=2)

    # filename truncation
    from ymmodel.helpers import truncate_filename

    super_long_filename = "/tmp/" + ("a" * 1024) + ".txt"
    with pytest.raises(OSError):
        with open(super_long_filename, "w") as f:
            f.write("wat")
    truncated_filename = truncate_filename(super_long_filename, 256)
    assert truncated_filename.name == "a" * 252 + ".txt"
    with pytest.raises(OSError):
        with open(truncated_filename, "w") as f:
            f.write("wat")
    truncated_filename = truncate_filename(super_long_filename)
    assert truncated_filename.name == "a" * 251 + ".txt"
    with open(truncated_filename, "w") as f:
        f.write("wat")
    truncated_filename.unlink()


def test_sample_runner():
    from ymmodel.helpers import SampleRunner

    assert SampleRunner().workers == 1
    assert SampleRunner(0).workers == 1
    assert SampleRunner(1).map(square, [1, 2, 3], offset=2) == [3, 6, 11]
    # the pool path goes through the event loop
    assert SampleRunner(3).map(square, range(7)) == [i * i for i in range(7)]


def test_write_json(temp_dir):
    from ymmodel.helpers import write_json

    path = write_json(Path(temp_dir) / "nested" / "out.json", {"values": np.arange(3), "name": "c"})
    assert path.is_file()
    assert orjson.loads(path.read_bytes()) == {"values": [0, 1, 2], "name": "c"}


def test_exception_chain():
    from ymmodel.errors import ConfigError, NumericalAbort
    from ymmodel.helpers import get_exception_chain, in_exception_chain, is_cancellation

    try:
        try:
            raise NumericalAbort("blow-up")
        except NumericalAbort:
            raise ConfigError("outer", key="dt")
    except ConfigError as e:
        chain = get_exception_chain(e)
        assert [type(_) for _ in chain] == [ConfigError, NumericalAbort]
        assert in_exception_chain(e, (NumericalAbort,))
        assert not in_exception_chain(e, (KeyboardInterrupt,))
        assert not is_cancellation(e)

    try:
        try:
            raise KeyboardInterrupt
        except KeyboardInterrupt:
            raise RuntimeError("interrupted")
    except RuntimeError as e:
        assert is_cancellation(e)
