#!/usr/bin/env python3
"""Walkthrough: the three relevance classifiers on one toy problem.

Multinomial naive Bayes (the default), logistic regression, and a linear
SVM all emit a score in [0, 1] per record; only the ranking matters to the
screening loop.
"""

import numpy as np

from screenloop import parse_csv
from screenloop.classify import ClassifierSpec, fit, predict_relevance
from screenloop.textfeat import build_features

ds = parse_csv(
    b"title,abstract,label_included\n"
    b"screening models,active learning ranks abstracts,1\n"
    b"review automation,learning to rank study abstracts,1\n"
    b"alpine cattle,seasonal grazing of highland herds,0\n"
    b"dairy herds,milk yield in alpine pastures,0\n"
    b"tool appraisal,active learning for screening pipelines,\n"  # unlabeled
    b"herd movement,grazing routes of cattle,\n"                  # unlabeled
)
matrix = build_features(ds)
labeled = [i for i, r in enumerate(ds.records) if r.label is not None]
y = [ds.records[i].label for i in labeled]
X = matrix.matrix[labeled, :]

print(f"  {'record':32s} {'nb':6s} {'logreg':6s} {'svm':6s}")
scores = {}
for kind in ("naive_bayes", "logistic_regression", "linear_svm"):
    model = fit(X, y, ClassifierSpec(kind=kind))
    scores[kind] = predict_relevance(model, matrix)

for i, record in enumerate(ds.records):
    row = " ".join(f"{scores[k][i]:.4f}" for k in scores)
    marker = {1: "+", 0: "-", None: "?"}[record.label]
    print(f"{marker} {record.title:32s} {row}")

print("\nAll three agree on the ranking of the two unlabeled records:")
for kind, vector in scores.items():
    order = sorted(range(len(vector)), key=lambda i: -vector[i])
    unlabeled_order = [i for i in order if ds.records[i].label is None]
    print(f"  {kind:20s} -> rows {unlabeled_order}")
