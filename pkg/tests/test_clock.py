import threading
import time

import pytest

from vilas.clock import SystemClock, VirtualClock, make_clock


def test_virtual_time_starts_at_zero_and_sleeps_exactly():
    clock = VirtualClock()
    assert clock.now() == 0.0
    clock.sleep(1.25)
    assert clock.now() == 1.25
    clock.sleep_until(10.0)
    assert clock.now() == 10.0


def test_sleepers_wake_in_deadline_order():
    # Time may only jump once every actor is asleep; holding working()
    # during setup is the idiom that keeps the spawn window quiescent.
    clock = VirtualClock()
    order = []
    ready = threading.Barrier(4)

    def sleeper(delay, name):
        ready.wait(timeout=5.0)
        clock.sleep(delay)
        order.append((name, clock.now()))

    threads = [threading.Thread(target=sleeper, args=(d, n))
               for d, n in ((0.3, "c"), (0.1, "a"), (0.2, "b"))]
    with clock.working():
        for t in threads:
            t.start()
        ready.wait(timeout=5.0)
        time.sleep(0.05)  # let all three block inside sleep()
    for t in threads:
        t.join(timeout=5.0)
    assert [n for n, _ in sorted(order, key=lambda x: x[1])] == ["a", "b", "c"]
    assert clock.now() == pytest.approx(0.3)


def test_worker_holds_time_back():
    clock = VirtualClock()
    stages = []
    release = threading.Event()

    def busy():
        with clock.working():
            release.wait(timeout=5.0)

    def sleeper():
        clock.sleep(0.05)
        stages.append(clock.now())

    b = threading.Thread(target=busy)
    b.start()
    time.sleep(0.05)  # let the worker register
    s = threading.Thread(target=sleeper)
    s.start()
    time.sleep(0.15)  # real time passes; virtual must not
    assert not stages
    release.set()
    s.join(timeout=5.0)
    b.join(timeout=5.0)
    assert stages == [0.05]


def test_in_flight_message_holds_time_back():
    clock = VirtualClock()
    stages = []
    clock.msg_sent()

    def sleeper():
        clock.sleep(0.05)
        stages.append(clock.now())

    s = threading.Thread(target=sleeper)
    s.start()
    time.sleep(0.1)
    assert not stages
    clock.msg_received()
    s.join(timeout=5.0)
    assert stages == [0.05]


def test_io_wait_suspends_working():
    clock = VirtualClock()
    done = []
    entered = threading.Event()
    release = threading.Event()

    def passive_worker():
        with clock.working():
            with clock.io_wait():
                entered.set()
                release.wait(timeout=5.0)

    def sleeper():
        clock.sleep(0.01)
        done.append(clock.now())

    w = threading.Thread(target=passive_worker)
    w.start()
    entered.wait(timeout=5.0)
    s = threading.Thread(target=sleeper)
    s.start()
    s.join(timeout=5.0)  # advances because the worker is io-suspended
    assert done == [0.01]
    release.set()
    w.join(timeout=5.0)


def test_stall_guard_recovers_from_leaked_in_flight():
    clock = VirtualClock(stall_timeout=0.1)
    clock.msg_sent()  # never received: simulates a dropped peer
    t0 = time.monotonic()
    clock.sleep(0.05)
    assert clock.now() == pytest.approx(0.05)
    assert clock.forced_advances == 1
    assert time.monotonic() - t0 >= 0.1


def test_system_clock_basics():
    clock = SystemClock()
    t0 = clock.now()
    clock.sleep(0.02)
    assert clock.now() - t0 >= 0.015
    with clock.working():
        with clock.io_wait():
            pass
    clock.msg_sent()
    clock.msg_received()


def test_make_clock():
    assert isinstance(make_clock("real"), SystemClock)
    assert isinstance(make_clock("virtual"), VirtualClock)
    with pytest.raises(ValueError):
        make_clock("warp")
