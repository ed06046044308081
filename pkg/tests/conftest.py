from __future__ import annotations

import pytest

from shadowpipe.builtin import load_builtin_plan
from shadowpipe.corpus import CorpusConfig, export_corpus, generate_corpus
from shadowpipe.engine import execute


@pytest.fixture(scope="session")
def bundle():
    return generate_corpus(CorpusConfig())


@pytest.fixture(scope="session")
def corpus_dir(bundle, tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    export_corpus(bundle, d)
    return d


@pytest.fixture(scope="session")
def rag_plan():
    return load_builtin_plan("rag")


@pytest.fixture(scope="session")
def train_plan():
    return load_builtin_plan("train")


@pytest.fixture(scope="session")
def rag_run(rag_plan, bundle):
    return execute(rag_plan, bundle)


@pytest.fixture(scope="session")
def train_run(train_plan, bundle):
    return execute(train_plan, bundle)
