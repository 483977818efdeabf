"""Canonical Huffman coding of integer symbol streams, used to measure the
storage cost (average bits per value) of quantized matrices."""
from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import count

import numpy as np


def code_lengths(freqs: dict[int, int]) -> dict[int, int]:
    """Huffman code length per symbol. A lone symbol gets length 1."""
    if not freqs:
        return {}
    if len(freqs) == 1:
        return {next(iter(freqs)): 1}
    tie = count()
    heap = [(f, next(tie), (sym,)) for sym, f in sorted(freqs.items())]
    heapq.heapify(heap)
    lengths = dict.fromkeys(freqs, 0)
    while len(heap) > 1:
        f1, _, s1 = heapq.heappop(heap)
        f2, _, s2 = heapq.heappop(heap)
        for sym in s1 + s2:
            lengths[sym] += 1
        heapq.heappush(heap, (f1 + f2, next(tie), s1 + s2))
    return lengths


def canonical_codes(lengths: dict[int, int]) -> dict[int, str]:
    codes = {}
    code = 0
    prev_len = 0
    for sym, n in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        code <<= n - prev_len
        codes[sym] = format(code, f"0{n}b")
        code += 1
        prev_len = n
    return codes


@dataclass
class CodeTable:
    codes: dict[int, str]
    _trie: dict = field(init=False, repr=False)

    def __post_init__(self):
        trie: dict = {}
        for sym, bits in self.codes.items():
            node = trie
            for ch in bits[:-1]:
                node = node.setdefault(ch, {})
                if not isinstance(node, dict):
                    raise ValueError("code table is not prefix-free")
            if bits[-1] in node:
                raise ValueError("code table is not prefix-free")
            node[bits[-1]] = sym
        self._trie = trie

    @classmethod
    def from_symbols(cls, symbols) -> "CodeTable":
        freqs = Counter(int(v) for v in np.asarray(symbols).ravel())
        return cls(canonical_codes(code_lengths(freqs)))

    def lengths(self) -> dict[int, int]:
        return {sym: len(bits) for sym, bits in self.codes.items()}

    def encode(self, symbols) -> str:
        return "".join(self.codes[int(v)] for v in np.asarray(symbols).ravel())

    def decode(self, bits: str) -> list[int]:
        out = []
        node = self._trie
        for ch in bits:
            node = node[ch]
            if not isinstance(node, dict):
                out.append(node)
                node = self._trie
        if node is not self._trie:
            raise ValueError("bit stream ends inside a code word")
        return out

    def is_prefix_free(self) -> bool:
        words = sorted(self.codes.values())
        return all(not b.startswith(a) for a, b in zip(words, words[1:]))


def huffman_stats(q) -> tuple[CodeTable, float]:
    """Code table for the entries of ``q`` and the resulting average bits
    per value."""
    flat = np.asarray(q).ravel()
    if flat.size == 0:
        raise ValueError("cannot build a code for an empty matrix")
    table = CodeTable.from_symbols(flat)
    freqs = Counter(int(v) for v in flat)
    total = sum(freqs[sym] * len(bits) for sym, bits in table.codes.items())
    return table, total / flat.size


def fixed_width_bits(q) -> int:
    """Bits per value for a plain fixed-width code over the distinct symbols."""
    distinct = len(np.unique(np.asarray(q)))
    return max(1, math.ceil(math.log2(distinct))) if distinct else 0
