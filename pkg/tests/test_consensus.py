import numpy as np
import pytest

from interactee.consensus import AnnotationSet, box_to_point, consensus_box, mean_shift
from interactee.exceptions import EmptyInput
from interactee.geometry import BoundingBox, iou


@pytest.mark.parametrize("box, point", [
    (BoundingBox(0, 0, 2, 2), (1, 1, 2, 2)),
    (BoundingBox(10, 20, 30, 40), (25, 40, 30, 40)),
    (BoundingBox(-5, -5, 10, 10), (0, 0, 10, 10)),
])
def test_box_to_point(box, point):
    np.testing.assert_array_equal(box_to_point(box), point)


def test_mean_shift_singleton():
    res = mean_shift([[1.0, 2.0, 3.0, 4.0]], bandwidth=1.0)
    assert len(res.clusters) == 1
    np.testing.assert_array_equal(res.clusters[0].mode, [1, 2, 3, 4])


def test_mean_shift_coincident():
    res = mean_shift([[1.0, 1, 1, 1], [1.0, 1, 1, 1]], bandwidth=1e-3)
    assert [c.members for c in res.clusters] == [[0, 1]]


def brute_force_modes(X, bandwidth, iters=1000):
    # independent re-statement of the flat-kernel iteration, one point at a time in pure python
    modes = []
    for x in X:
        cur = list(x)
        for _ in range(iters):
            near = [p for p in X if sum((a - b) ** 2 for a, b in zip(p, cur)) ** 0.5 <= bandwidth]
            nxt = [sum(col) / len(near) for col in zip(*near)]
            if nxt == cur:
                break
            cur = nxt
        modes.append(cur)
    return modes


def test_mean_shift_planted_groups(rng):
    group = rng.uniform(-0.45, 0.45, size=(5, 4))
    far = np.array([[100.0, 0, 0, 0]])
    X = np.vstack([group, far])
    res = mean_shift(X, bandwidth=10)
    assert sorted(len(c.members) for c in res.clusters) == [1, 5]
    oracle = brute_force_modes(X.tolist(), 10)
    np.testing.assert_allclose(oracle[0], group.mean(axis=0), atol=1e-12)
    big = max(res.clusters, key=lambda c: len(c.members))
    np.testing.assert_allclose(big.mode, oracle[0], atol=1e-9)


def test_clusters_partition_indices(rng):
    X = rng.uniform(0, 50, size=(30, 4))
    res = mean_shift(X, bandwidth=8)
    members = sorted(i for c in res.clusters for i in c.members)
    assert members == list(range(30))
    assert all(c.members for c in res.clusters)


def test_consensus_single_annotator():
    b = BoundingBox(1, 2, 3, 4)
    assert consensus_box(AnnotationSet("im", 0, [b]), bandwidth=10) is b


def test_consensus_rejects_empty():
    with pytest.raises(EmptyInput):
        AnnotationSet("im", 0, [])


def test_consensus_identical_plus_far():
    same = [BoundingBox(10, 10, 50, 50) for _ in range(5)]
    far = BoundingBox(500, 500, 20, 20)
    out = consensus_box(same + [far], bandwidth=50)
    assert out == same[0]


def test_consensus_jittered_groups(rng):
    base, other = BoundingBox(10, 10, 50, 50), BoundingBox(200, 200, 50, 50)

    def jitter(b):
        d = rng.uniform(-2, 2, size=4)
        return BoundingBox(b.x_min + d[0], b.y_min + d[1], b.width + d[2], b.height + d[3])

    group = [jitter(base) for _ in range(4)]
    boxes = [group[0], jitter(other), group[1], group[2], jitter(other), group[3]]
    out = consensus_box(boxes, bandwidth=30)
    mean_iou = [np.mean([iou(g, h) for h in group if h is not g]) for g in group]
    assert out is group[int(np.argmax(mean_iou))]


def test_consensus_tie_goes_to_lowest_index():
    a, b = BoundingBox(0, 0, 10, 10), BoundingBox(0, 0, 10, 10)
    assert consensus_box([a, b], bandwidth=5) is a


def test_duplicate_of_winner_keeps_winner(rng):
    boxes = [BoundingBox(100 + rng.uniform(-2, 2), 100 + rng.uniform(-2, 2), 40, 40) for _ in range(5)]
    boxes.append(BoundingBox(400, 10, 30, 30))
    win = consensus_box(boxes, bandwidth=40)
    again = consensus_box(boxes + [win], bandwidth=40)
    assert again == win


def test_permutation_changes_nothing_without_ties(rng):
    boxes = [BoundingBox(100 + rng.uniform(-3, 3), 100 + rng.uniform(-3, 3),
                         40 + rng.uniform(-3, 3), 40 + rng.uniform(-3, 3)) for _ in range(6)]
    boxes.append(BoundingBox(400, 10, 30, 30))
    base = consensus_box(boxes, bandwidth=40)
    for _ in range(5):
        perm = [boxes[i] for i in rng.permutation(len(boxes))]
        assert consensus_box(perm, bandwidth=40) == base
