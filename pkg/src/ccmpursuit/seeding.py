"""Seed splitting. One integer seeds a whole experiment; every sub-stream is
derived with SplitMix64 so episodes and analyses never share random state."""

MASK64 = 0xFFFFFFFFFFFFFFFF

# stream tags for derive_seed
WORLD = 1
PENDULUM = 2
CCM = 3


def splitmix64(x):
    """SplitMix64 finaliser: a bijection on 64-bit integers."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def episode_seed(condition_seed, episode_index):
    """Seed of episode ``episode_index``: ``splitmix64(seed + index)``.

    Injective over indices because the addition is taken mod 2**64 and the
    finaliser is a bijection.
    """
    return splitmix64((int(condition_seed) + int(episode_index)) & MASK64)


def derive_seed(seed, *tags):
    """Fold integer tags into ``seed`` one at a time."""
    x = int(seed) & MASK64
    for t in tags:
        x = splitmix64(x ^ splitmix64(int(t) & MASK64))
    return x
