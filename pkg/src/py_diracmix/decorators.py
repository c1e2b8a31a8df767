import functools
import inspect
import typing
from collections.abc import Callable
from typing import Any

from .validators.bases import Validator

type Checks = list[tuple[str, list[Validator]]]


def _annotated_validators(func: Callable, sig: inspect.Signature) -> Checks:
    """Validators attached through `Annotated[...]`, per parameter, in order."""
    try:
        hints = typing.get_type_hints(func, include_extras=True)
    except NameError:
        # Unresolvable forward references; fall back to the raw annotations.
        hints = {name: p.annotation for name, p in sig.parameters.items()}

    checks: Checks = []
    for name in sig.parameters:
        hint = hints.get(name)
        if typing.get_origin(hint) is not typing.Annotated:
            continue
        found = [m for m in typing.get_args(hint)[1:] if isinstance(m, Validator)]
        if found:
            checks.append((name, found))
    return checks


def enforce(func: Callable) -> Callable:
    """
    Validates the arguments of `func` against the validators in its `Annotated`
    hints before each call. Validators are collected once, at decoration time.
    """
    sig = inspect.signature(func)
    checks = _annotated_validators(func, sig)
    if not checks:
        return func

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        bound = sig.bind(*args, **kwargs)
        bound.apply_defaults()
        for name, validators in checks:
            for validator in validators:
                validator.validate(bound.arguments[name], func.__name__, name)
        return func(*bound.args, **bound.kwargs)

    return wrapper
