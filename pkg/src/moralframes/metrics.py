"""Precision/recall/F1 helpers for the two labeling tasks."""


def _prf(gold, pred, label):
    tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
    fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
    fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, f1


def per_class_report(gold, pred, labels) -> dict:
    report = {}
    for label in labels:
        prec, rec, f1 = _prf(gold, pred, label)
        support = sum(1 for g in gold if g == label)
        report[label] = {"precision": prec, "recall": rec, "f1": f1,
                         "support": support}
    return report


def macro_f1(gold, pred, labels) -> float:
    if not gold:
        return 0.0
    return sum(_prf(gold, pred, l)[2] for l in labels) / len(labels)


def weighted_f1(gold, pred, labels) -> float:
    if not gold:
        return 0.0
    total = 0.0
    for label in labels:
        support = sum(1 for g in gold if g == label)
        total += support * _prf(gold, pred, label)[2]
    return total / len(gold)


def accuracy(gold, pred) -> float:
    if not gold:
        return 0.0
    return sum(1 for g, p in zip(gold, pred) if g == p) / len(gold)
