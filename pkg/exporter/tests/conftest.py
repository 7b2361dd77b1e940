"""Fixtures for the exporter suite.

Everything runs against a tiny randomly initialized checkpoint built at
session start, so the tests are offline and fast.  Weight quality is
irrelevant: the suite checks file format, row ordering, and failure
behavior, none of which depend on what the embeddings mean.
"""

import numpy as np
import pytest


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory) -> str:
    """A local CLIP checkpoint: 2 layers each side, 12-dim projection."""
    import torch
    from tokenizers.pre_tokenizers import ByteLevel
    from transformers import (
        CLIPConfig,
        CLIPImageProcessor,
        CLIPModel,
        CLIPProcessor,
        CLIPTokenizer,
    )

    out = tmp_path_factory.mktemp("tiny_clip")

    # Byte-level BPE with no merges: every byte is its own token, plus the
    # end-of-word forms the tokenizer emits for word-final characters.
    vocab = {"<|startoftext|>": 0, "<|endoftext|>": 1}
    for ch in sorted(ByteLevel.alphabet()):
        vocab.setdefault(ch, len(vocab))
    for ch in sorted(ByteLevel.alphabet()):
        vocab.setdefault(ch + "</w>", len(vocab))
    tokenizer = CLIPTokenizer(vocab=vocab, merges=[])
    image_processor = CLIPImageProcessor(
        size={"shortest_edge": 32}, crop_size={"height": 32, "width": 32}
    )
    CLIPProcessor(image_processor=image_processor, tokenizer=tokenizer).save_pretrained(out)

    config = CLIPConfig(
        projection_dim=12,
        text_config={
            "vocab_size": len(vocab),
            "hidden_size": 16,
            "intermediate_size": 32,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "max_position_embeddings": 77,
            "bos_token_id": 0,
            "eos_token_id": 1,
        },
        vision_config={
            "hidden_size": 24,
            "intermediate_size": 48,
            "num_hidden_layers": 2,
            "num_attention_heads": 2,
            "image_size": 32,
            "patch_size": 8,
        },
    )
    torch.manual_seed(0)
    CLIPModel(config).save_pretrained(out)
    return str(out)


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    """Ten small PNGs named so sorted-order scanning is unambiguous."""
    from PIL import Image

    out = tmp_path_factory.mktemp("pngs")
    rng = np.random.default_rng(0)
    for i in range(10):
        arr = rng.integers(0, 256, size=(40, 48, 3), dtype=np.uint8)
        Image.fromarray(arr).save(out / f"img_{i:02d}.png")
    return out


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("corpus") / "corpus.txt"
    path.write_text("ant\nviolin\n", encoding="utf-8")
    return path


# Mirrors the verdict reporting of the main suite: one line per criterion,
# emitted through a terminal-summary section so capture cannot eat it.
_CRITERION_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    return _CRITERION_LINES.append


def pytest_terminal_summary(terminalreporter):
    if _CRITERION_LINES:
        terminalreporter.section("exporter acceptance")
        for line in _CRITERION_LINES:
            terminalreporter.line(line)
