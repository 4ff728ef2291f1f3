"""Writes vectors.txt the way the original word2vec tool does in text mode:
a `count dim` header, then `word v1 ... vdim ` with %lf values and a
trailing space before the newline."""

import random

rng = random.Random(20)
words = ["</s>", "the", "haus", "größe", "東京", "x_y"]
dim = 4
with open("vectors.txt", "w", encoding="utf-8", newline="\n") as f:
    f.write(f"{len(words)} {dim}\n")
    for w in words:
        f.write(w + " ")
        for _ in range(dim):
            f.write("%lf " % rng.uniform(-1, 1))
        f.write("\n")
