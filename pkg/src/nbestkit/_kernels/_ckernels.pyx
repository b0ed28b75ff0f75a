# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled n-gram scoring kernels.

Mirrors ``_pykernels`` operation for operation. N-grams are packed
exactly into 128-bit keys (21 bits per code point for character grams,
32 bits per interned token id for word grams), so counting is exact and
both backends produce the same scores up to floating-point noise.

Limits: character orders up to 6, token orders up to 4. The dispatch
wrapper in ``nbestkit._kernels`` falls back to the pure implementation
beyond those.
"""

from cython.operator cimport dereference as deref, preincrement as inc
from libc.math cimport exp, log
from libcpp.map cimport map as cppmap
from libcpp.pair cimport pair
from libcpp.vector cimport vector

ctypedef unsigned long long u64
ctypedef pair[u64, u64] Gram


cdef vector[u64] _strip_codepoints(str text):
    cdef vector[u64] out
    cdef Py_UCS4 ch
    for ch in text:
        if not ch.isspace():
            out.push_back(<u64> ch)
    return out


cdef inline Gram _pack(vector[u64]& s, size_t start, int n, int bits, int per_word):
    cdef u64 hi = 0
    cdef u64 lo = 0
    cdef int k
    for k in range(n):
        if k < per_word:
            hi |= s[start + k] << (bits * k)
        else:
            lo |= s[start + k] << (bits * (k - per_word))
    return Gram(hi, lo)


cdef long long _clipped_matches(vector[u64]& a, vector[u64]& b, int n, int bits, int per_word):
    cdef cppmap[Gram, long long] a_counts
    cdef cppmap[Gram, long long] b_counts
    cdef long long total_a = <long long> a.size() - n + 1
    cdef long long total_b = <long long> b.size() - n + 1
    cdef long long i
    for i in range(total_a):
        inc(a_counts[_pack(a, <size_t> i, n, bits, per_word)])
    for i in range(total_b):
        inc(b_counts[_pack(b, <size_t> i, n, bits, per_word)])
    cdef long long matches = 0
    cdef long long count, other
    cdef cppmap[Gram, long long].iterator it = a_counts.begin()
    cdef cppmap[Gram, long long].iterator hit
    while it != a_counts.end():
        hit = b_counts.find(deref(it).first)
        if hit != b_counts.end():
            count = deref(it).second
            other = deref(hit).second
            matches += count if count < other else other
        inc(it)
    return matches


def chrf_score(str candidate, str reference, int max_order, double beta):
    cdef vector[u64] cand = _strip_codepoints(candidate)
    cdef vector[u64] ref = _strip_codepoints(reference)
    cdef double sum_p = 0.0
    cdef double sum_r = 0.0
    cdef int orders = 0
    cdef int n
    cdef long long total_cand, total_ref, matches
    for n in range(1, max_order + 1):
        total_cand = <long long> cand.size() - n + 1
        total_ref = <long long> ref.size() - n + 1
        if total_cand <= 0 and total_ref <= 0:
            continue
        orders += 1
        if total_cand <= 0 or total_ref <= 0:
            continue
        matches = _clipped_matches(cand, ref, n, 21, 3)
        sum_p += matches / <double> total_cand
        sum_r += matches / <double> total_ref
    if orders == 0:
        return 1.0
    cdef double precision = sum_p / orders
    cdef double recall = sum_r / orders
    if precision + recall == 0.0:
        return 0.0
    cdef double beta_sq = beta * beta
    return (1.0 + beta_sq) * precision * recall / (beta_sq * precision + recall)


cdef vector[u64] _intern(list tokens, dict ids):
    cdef vector[u64] out
    cdef object known
    for tok in tokens:
        known = ids.get(tok)
        if known is None:
            known = len(ids)
            ids[tok] = known
        out.push_back(<u64> <long long> known)
    return out


def sentence_bleu_score(str candidate, str reference, int max_order):
    cand_tokens = candidate.split()
    ref_tokens = reference.split()
    cdef long long cand_len = len(cand_tokens)
    cdef long long ref_len = len(ref_tokens)
    if cand_len == 0:
        return 0.0
    ids = {}
    cdef vector[u64] cand_ids = _intern(cand_tokens, ids)
    cdef vector[u64] ref_ids = _intern(ref_tokens, ids)
    cdef double log_sum = 0.0
    cdef double p
    cdef long long total, matches
    cdef int n
    for n in range(1, max_order + 1):
        total = cand_len - n + 1
        if total < 0:
            total = 0
        matches = _clipped_matches(cand_ids, ref_ids, n, 32, 2)
        if n == 1:
            if matches == 0:
                return 0.0
            p = matches / <double> total
        else:
            p = (matches + 1.0) / (total + 1.0)
        log_sum += log(p)
    cdef double geometric_mean = exp(log_sum / max_order)
    cdef double brevity
    if cand_len < ref_len:
        brevity = exp(1.0 - ref_len / <double> cand_len)
    else:
        brevity = 1.0
    return 100.0 * brevity * geometric_mean
