from typing import Any, Optional, Type, TypeVar
import jax
import chex
import dataclasses
import jax.numpy as jnp
import typing_extensions

T = TypeVar('T')

@typing_extensions.dataclass_transform(
    eq_default=True,
    order_default=False,
    field_specifiers=(dataclasses.Field, dataclasses.field),
)
def dataclass(cls: Optional[Any] = None, *, frozen: bool = False) -> Any:
    """chex dataclass usable bare (`@dataclass`) or with options (`@dataclass(frozen=True)`)."""
    def wrap(c: Type[T]) -> Type[T]:
        return chex.dataclass(c, frozen=frozen)

    if cls is None:
        return wrap
    return wrap(cls)


def tree_mean(tree: T, axis: int = 0) -> T:
    return jax.tree_util.tree_map(lambda x: jnp.mean(x, axis=axis), tree)

