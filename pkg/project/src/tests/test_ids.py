from copy import copy, deepcopy

import pytest
from codednfv.cloud.ids import Id, IncompatibleIdError, MessageId, TrialId
from codednfv.errors import NfvError


def test_collision_free():
    amount = 10000
    assert len({MessageId() for _ in range(amount)}) == amount


def test_prefix():
    assert str(TrialId()).startswith("trial-")
    assert repr(MessageId()).startswith("MessageId(message-")


def test_copies_are_equal():
    mid = MessageId()
    assert mid != MessageId()
    assert copy(mid) == mid
    assert deepcopy(mid) == mid
    assert copy(mid) is not mid
    assert len({mid, copy(mid), deepcopy(mid)}) == 1


def test_order():
    ids = [TrialId() for _ in range(5)]
    assert sorted(ids) == sorted(ids, key=str)


def test_not_a_string():
    trial = TrialId()
    assert trial != str(trial)


def test_incompatibility():
    trial = TrialId()
    message = MessageId()

    with pytest.raises(IncompatibleIdError) as e:
        trial == message
    assert e.value.left == trial
    assert e.value.right == message
    assert isinstance(e.value, NfvError)

    with pytest.raises(IncompatibleIdError):
        sorted([trial, message])

    with pytest.raises(IncompatibleIdError):
        Id("plain") < trial
