import shutil
import subprocess

import pytest

from antswarm.prng import PCG32

GOLDEN_SEED42 = [0xA15C02B7, 0x7B47F409, 0xBA1D3330, 0x83D2F293, 0xBFA4784B, 0xCBED606E]

C_REFERENCE = r"""
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
typedef struct { uint64_t state; uint64_t inc; } pcg32_random_t;
uint32_t pcg32_random_r(pcg32_random_t* rng) {
    uint64_t oldstate = rng->state;
    rng->state = oldstate * 6364136223846793005ULL + rng->inc;
    uint32_t xorshifted = ((oldstate >> 18u) ^ oldstate) >> 27u;
    uint32_t rot = oldstate >> 59u;
    return (xorshifted >> rot) | (xorshifted << ((-rot) & 31));
}
void pcg32_srandom_r(pcg32_random_t* rng, uint64_t initstate, uint64_t initseq) {
    rng->state = 0U;
    rng->inc = (initseq << 1u) | 1u;
    pcg32_random_r(rng);
    rng->state += initstate;
    pcg32_random_r(rng);
}
int main(int argc, char** argv) {
    pcg32_random_t r;
    pcg32_srandom_r(&r, strtoull(argv[1], 0, 10), strtoull(argv[2], 0, 10));
    int n = atoi(argv[3]);
    for (int i = 0; i < n; i++) printf("%u\n", pcg32_random_r(&r));
    return 0;
}
"""


def test_golden_values():
    r = PCG32(42)
    assert [r.next_u32() for _ in range(6)] == GOLDEN_SEED42


@pytest.mark.skipif(shutil.which("cc") is None, reason="no C compiler")
@pytest.mark.parametrize("seed,stream", [(42, 54), (0, 54), (2**64 - 1, 54), (7, 1), (123456789, 2**62)])
def test_matches_c_reference(tmp_path, seed, stream):
    src = tmp_path / "pcg.c"
    src.write_text(C_REFERENCE)
    exe = tmp_path / "pcg"
    subprocess.run(["cc", "-O2", "-o", str(exe), str(src)], check=True)
    out = subprocess.run([str(exe), str(seed), str(stream), "1000"], check=True, capture_output=True,
                         text=True).stdout.split()
    r = PCG32(seed, stream)
    assert [r.next_u32() for _ in range(1000)] == [int(x) for x in out]


def test_determinism_and_streams():
    a, b = PCG32(9), PCG32(9)
    assert [a.next_u32() for _ in range(1000)] == [b.next_u32() for _ in range(1000)]
    c, d = PCG32(9, 1), PCG32(9, 2)
    xs = [c.next_u32() for _ in range(1000)]
    ys = [d.next_u32() for _ in range(1000)]
    assert sum(x == y for x, y in zip(xs, ys)) < 5


def test_derived_draws():
    r = PCG32(5)
    u = [r.random() for _ in range(2000)]
    assert all(0.0 <= x < 1.0 for x in u)
    assert abs(sum(u) / len(u) - 0.5) < 0.03
    assert all(3 <= r.uniform(3, 4) < 4 for _ in range(100))
    counts = [0] * 6
    for _ in range(6000):
        counts[r.below(6)] += 1
    assert min(counts) > 850
    with pytest.raises(ValueError):
        r.below(0)
    p = r.permutation(20)
    assert sorted(p) == list(range(20))
