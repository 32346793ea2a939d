"""
Products of generator monomials L_mu L_nu^* in the Toeplitz algebra of a graph.

Creation operators act by L_mu xi_lambda = xi_{lambda mu} (traverse lambda, then mu),
so a product of two monomials is again a monomial or zero: the inner factor
L_nu^* L_alpha collapses by matching the tail of one path against the other.
"""
from functools import reduce
from typing import Iterable, Optional

from app.models import Monomial, Path


def strip_tail(path: Path, tail: Path) -> Optional[Path]:
    """The head with path = head.then(tail), or None if `tail` does not end `path`"""
    if tail.length > path.length or path.range != tail.range:
        return None
    head, rest = path.split(path.length - tail.length)
    if rest.edges != tail.edges or rest.start != tail.start:
        return None
    return head


def multiply(left: Optional[Monomial], right: Optional[Monomial]) -> Optional[Monomial]:
    """(L_mu1 L_nu1^*)(L_mu2 L_nu2^*) in canonical form; None stands for 0"""
    if left is None or right is None:
        return None

    # L_nu1^* L_mu2 = L_head when mu2 = head nu1
    head = strip_tail(right.mu, left.nu)
    if head is not None:
        return Monomial(mu=head.then(left.mu), nu=right.nu)

    # L_nu1^* L_mu2 = L_head^* when nu1 = head mu2
    head = strip_tail(left.nu, right.mu)
    if head is not None:
        return Monomial(mu=left.mu, nu=head.then(right.nu))
    return None


def product(factors: Iterable[Optional[Monomial]]) -> Optional[Monomial]:
    return reduce(multiply, factors)


def is_diagonal(word: Optional[Monomial]) -> bool:
    return word is not None and word.mu == word.nu
