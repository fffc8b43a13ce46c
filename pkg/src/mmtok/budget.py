"""Streaming enforcement of a thinking-token budget over a decode stream.

The controller watches a token stream for configurable open/close markers
around the thinking region. Under a budget B with grace window G it passes
tokens through, asks for a soft close when the B-th thinking token is
emitted, and if the model has still not closed by the time the (B+G)-th
thinking token would appear, it injects the close marker itself in that
token's place. A budget of 0 disables enforcement entirely and the stream
passes through untouched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Hashable, Iterable, Sequence

from .errors import InvalidConfigError, ProtocolError


class Phase(enum.Enum):
    PRE_THINK = "pre_think"
    THINKING = "thinking"
    CLOSING = "closing"          # budget reached, inside the grace window
    ANSWER = "answer"
    DONE = "done"


class Action(enum.Enum):
    PASS = "pass"
    REQUEST_SOFT_CLOSE = "request_soft_close"
    FORCE_INJECT_CLOSE = "force_inject_close"


@dataclass(frozen=True)
class BudgetConfig:
    budget: int
    grace: int = 500
    think_open: Hashable = "<think>"
    think_close: Hashable = "</think>"

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise InvalidConfigError(f"budget must be >= 0, got {self.budget}")
        if self.grace < 0:
            raise InvalidConfigError(f"grace must be >= 0, got {self.grace}")
        if self.think_open == self.think_close:
            raise InvalidConfigError("think_open and think_close markers must differ")


@dataclass(frozen=True)
class BudgetState:
    phase: Phase = Phase.PRE_THINK
    thinking_tokens_used: int = 0
    forced_close: bool = False


def on_token(state: BudgetState, cfg: BudgetConfig, token: Hashable) -> tuple[BudgetState, Action]:
    """Advance the state machine by one decoded token.

    Returns the next state and the action the caller must take: PASS forwards
    the token, REQUEST_SOFT_CLOSE forwards it while asking the model to wrap
    up, and FORCE_INJECT_CLOSE means the token is discarded and the close
    marker emitted in its place. The budget is cumulative across thinking
    blocks, so a block reopened after exhaustion is force-closed on its first
    content token.
    """
    if state.phase is Phase.DONE:
        raise ProtocolError("token received after stream was finished")

    if token == cfg.think_close:
        return BudgetState(Phase.ANSWER, state.thinking_tokens_used, state.forced_close), Action.PASS

    if token == cfg.think_open:
        if state.phase in (Phase.THINKING, Phase.CLOSING):
            return state, Action.PASS
        reopened_exhausted = cfg.budget > 0 and state.thinking_tokens_used >= cfg.budget
        phase = Phase.CLOSING if reopened_exhausted else Phase.THINKING
        return BudgetState(phase, state.thinking_tokens_used, state.forced_close), Action.PASS

    phase = state.phase
    if phase is Phase.THINKING or phase is Phase.CLOSING:
        used_after = state.thinking_tokens_used + 1
        if cfg.budget > 0:
            if used_after >= cfg.budget + cfg.grace:
                return (
                    BudgetState(Phase.ANSWER, state.thinking_tokens_used, True),
                    Action.FORCE_INJECT_CLOSE,
                )
            if used_after == cfg.budget:
                return (
                    BudgetState(Phase.CLOSING, used_after, state.forced_close),
                    Action.REQUEST_SOFT_CLOSE,
                )
        return BudgetState(phase, used_after, state.forced_close), Action.PASS

    return state, Action.PASS


def finish(state: BudgetState) -> BudgetState:
    """Mark the stream as ended; further tokens are a protocol error."""
    return replace(state, phase=Phase.DONE)


def filter_stream(
    tokens: Iterable[Hashable], cfg: BudgetConfig
) -> tuple[list[Hashable], BudgetState]:
    """Run the controller over a whole stream, returning the forwarded tokens.

    The caller owns the feed: in live decoding the model would continue from
    the injected close, whereas replaying a fixed iterable simply passes the
    remaining tokens through in the answer phase.
    """
    state = BudgetState()
    out: list[Hashable] = []
    for token in tokens:
        state, action = on_token(state, cfg, token)
        if action is Action.FORCE_INJECT_CLOSE:
            out.append(cfg.think_close)
        else:
            out.append(token)
    return out, finish(state)


@dataclass(frozen=True)
class TraceToken:
    """One recorded decode step: a token id plus its marker role."""

    token_id: int
    marker: str = "none"    # none | open | close

    def __post_init__(self) -> None:
        if self.marker not in ("none", "open", "close"):
            raise ProtocolError(f"unknown marker kind {self.marker!r}")


@dataclass(frozen=True)
class BudgetSummary:
    """Effect of one budget value replayed against a recorded trace."""

    budget: int
    grace: int
    thinking_tokens_total: int
    thinking_tokens_kept: int
    forced: bool
    forced_at: int | None       # 1-based thinking position the injected close displaced
    answer_offset: int          # output stream position where the answer region starts
    truncated: bool


class _Marker(enum.Enum):
    # sentinels fed to the controller in place of marker tokens, so trace
    # token ids can never collide with the configured markers
    OPEN = "open"
    CLOSE = "close"


def _validate_nesting(trace: Sequence[TraceToken]) -> tuple[int, int | None]:
    """Check marker nesting; returns (total thinking tokens, last close position)."""
    inside = False
    total = 0
    last_close: int | None = None
    for i, tok in enumerate(trace):
        if tok.marker == "open":
            if inside:
                raise ProtocolError(f"nested thinking block opened at position {i}")
            inside = True
        elif tok.marker == "close":
            if not inside:
                raise ProtocolError(f"close marker without open at position {i}")
            inside = False
            last_close = i
        elif inside:
            total += 1
    if inside:
        raise ProtocolError("thinking block never closed")
    return total, last_close


def _replay(
    trace: Sequence[TraceToken], total_thinking: int, last_close: int | None,
    budget: int, grace: int,
) -> BudgetSummary:
    cfg = BudgetConfig(
        budget=budget, grace=grace,
        think_open=_Marker.OPEN, think_close=_Marker.CLOSE,
    )
    state = BudgetState()
    out_len = 0
    answer_offset: int | None = None
    forced_at: int | None = None
    i = 0
    while i < len(trace):
        tok = trace[i]
        if tok.marker == "open":
            value: Hashable = _Marker.OPEN
        elif tok.marker == "close":
            value = _Marker.CLOSE
        else:
            value = tok.token_id
        state, action = on_token(state, cfg, value)
        out_len += 1
        if action is Action.FORCE_INJECT_CLOSE:
            # the injected close replaces this token; the model never produced
            # the rest of its thinking, so resume at the trace's answer region
            forced_at = budget + grace
            answer_offset = out_len
            i = (last_close + 1) if last_close is not None else len(trace)
            continue
        if tok.marker == "close":
            answer_offset = out_len
        i += 1
    return BudgetSummary(
        budget=budget,
        grace=grace,
        thinking_tokens_total=total_thinking,
        thinking_tokens_kept=state.thinking_tokens_used,
        forced=state.forced_close,
        forced_at=forced_at,
        answer_offset=answer_offset if answer_offset is not None else out_len,
        truncated=state.thinking_tokens_used < total_thinking,
    )


def budget_sweep(
    trace: Sequence[TraceToken],
    budgets: Sequence[int],
    grace: int = 500,
) -> list[BudgetSummary]:
    """Replay a recorded trace under each budget and summarize the truncation.

    A trace whose thinking fits within budget + grace is reported untouched;
    otherwise the summary records how many thinking tokens survive and where
    the forced close landed. Malformed marker nesting raises ProtocolError.
    """
    if grace < 0:
        raise InvalidConfigError(f"grace must be >= 0, got {grace}")
    for b in budgets:
        if b < 0:
            raise InvalidConfigError(f"budgets must be >= 0, got {b}")
    total_thinking, last_close = _validate_nesting(trace)
    return [_replay(trace, total_thinking, last_close, b, grace) for b in budgets]
