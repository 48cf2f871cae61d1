"""Byte-level tokenizer: 256 byte values plus BOS/EOS/PAD specials."""

BOS = 256
EOS = 257
PAD = 258
VOCAB_SIZE = 259


def tokenize(text: str) -> list[int]:
    """UTF-8 bytes as ids; callers add specials themselves."""
    return list(text.encode("utf-8"))


def detokenize(ids) -> str:
    """Inverse of tokenize; special ids are stripped."""
    return bytes(i for i in ids if 0 <= i < 256).decode("utf-8", errors="replace")
