"""Summarization-based data augmentation for document-level event classification.

Subpackages and modules:

- corpus: labeled document corpora, class statistics, stratified folds
- lm: step-model contract and the deterministic toy bigram model
- decode: greedy, beam, top-k, top-p, and contrastive decoding
- vectorize: TF-IDF n-gram features with pinned semantics
- svm: one-vs-rest squared-hinge linear SVM (dual coordinate descent)
- evaluation: macro-F1 and cross-validated evaluation
- pipeline: augmentation and experiment orchestration
- client: HTTP adapter for a remote summarization model server
- cli: the `sumaug` command
"""

__version__ = "0.1.0"
