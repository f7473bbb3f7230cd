"""Builds large isosceles-free subsets of the n x n torus (coordinates wrap modulo n).

On every iteration, improve the priority_v# function over the versions from
previous iterations. Make only small changes. Try to make the code short.
"""

import funsearch


@funsearch.run
def evaluate(n: int) -> int:
  """Returns the size of an isosceles-free subset of the n x n torus."""
  return len(solve(n))


def dist2(a, b, n):
  dx = min(abs(a[0] - b[0]), n - abs(a[0] - b[0]))
  dy = min(abs(a[1] - b[1]), n - abs(a[1] - b[1]))
  return dx * dx + dy * dy


def solve(n: int) -> list:
  """Adds points in order of priority, skipping any that would create an isosceles triangle."""
  pts = [(x, y) for x in range(n) for y in range(n)]
  scores = {p: priority(p, n) for p in pts}
  order = sorted(pts, key=lambda e: scores[e], reverse=True)
  chosen = []
  dists = {}
  for q in order:
    seen = set()
    ok = True
    for a in chosen:
      d = dist2(a, q, n)
      if d in seen or d in dists[a]:
        ok = False
        break
      seen.add(d)
    if not ok:
      continue
    for a in chosen:
      dists[a].add(dist2(a, q, n))
    dists[q] = seen
    chosen.append(q)
  global CONSTRUCTION
  CONSTRUCTION = {"problem": "noiso", "n": n, "geometry": "torus",
                  "elements": [list(p) for p in chosen]}
  return chosen


@funsearch.evolve
def priority(el: tuple, n: int) -> float:
  """Returns the priority with which to add `el`, a point (x, y) of the n x n torus, to the set."""
  return 0.0
