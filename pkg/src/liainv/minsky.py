"""Two-counter (Minsky) machines: the ``.mm`` text format and an exact interpreter.

Instructions are 1-indexed.  The last instruction is ``halt`` and reaching it
means the machine has halted; it has no successor configuration.

``.mm`` format, one instruction per line (``;`` also separates instructions)::

    inc k      # c_k += 1, go to next
    dec k      # c_k -= 1, go to next (error if c_k == 0)
    jz k j     # if c_k == 0 go to j, else go to next
    halt
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


class MachineError(Exception):
    pass


class MachineSyntaxError(MachineError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class BadJumpTarget(MachineSyntaxError):
    pass


class MissingHalt(MachineSyntaxError):
    pass


class IllFormed(MachineError):
    """Decrement of a zero counter; the machine model leaves this undefined."""


@dataclass(frozen=True)
class Inc:
    k: int


@dataclass(frozen=True)
class Dec:
    k: int


@dataclass(frozen=True)
class Jz:
    k: int
    j: int


@dataclass(frozen=True)
class Halt:
    pass


Instruction = Union[Inc, Dec, Jz, Halt]


@dataclass(frozen=True)
class MinskyConfig:
    q: int
    c1: int = 0
    c2: int = 0

    def counter(self, k: int) -> int:
        return self.c1 if k == 1 else self.c2

    def as_dict(self) -> dict[str, int]:
        return {"c1": self.c1, "c2": self.c2, "q": self.q}


INITIAL = MinskyConfig(1, 0, 0)


@dataclass(frozen=True)
class MinskyMachine:
    instructions: tuple[Instruction, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        n = len(self.instructions)
        if n == 0 or not isinstance(self.instructions[-1], Halt):
            raise MissingHalt("final instruction must be 'halt'")
        for idx, ins in enumerate(self.instructions, start=1):
            if isinstance(ins, Halt) and idx != n:
                raise MachineSyntaxError(f"instruction {idx}: 'halt' may only be the final instruction")
            if isinstance(ins, (Inc, Dec, Jz)) and ins.k not in (1, 2):
                raise MachineSyntaxError(f"instruction {idx}: counter must be 1 or 2, got {ins.k}")
            if isinstance(ins, Jz) and not 1 <= ins.j <= n:
                raise BadJumpTarget(f"instruction {idx}: jump target {ins.j} outside [1, {n}]")

    @property
    def n(self) -> int:
        return len(self.instructions)

    def __getitem__(self, q: int) -> Instruction:
        return self.instructions[q - 1]

    def __str__(self) -> str:
        return format_machine(self)


@dataclass(frozen=True)
class MinskyTrace:
    configs: tuple[MinskyConfig, ...]
    halted_at: Optional[int] = None

    def __len__(self) -> int:
        return len(self.configs)

    def __getitem__(self, t: int) -> MinskyConfig:
        return self.configs[t]

    def f1(self, t: int) -> int:
        return self.configs[t].c1

    def f2(self, t: int) -> int:
        return self.configs[t].c2

    def fq(self, t: int) -> int:
        return self.configs[t].q


def parse_machine(text: str, name: str = "") -> MinskyMachine:
    """Parse ``.mm`` text.  Blank and comment-only lines are not instructions."""
    instructions: list[Instruction] = []
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        for chunk in raw_line.split("#", 1)[0].split(";"):
            words = chunk.split()
            if not words:
                continue
            op, args = words[0].lower(), words[1:]
            try:
                nums = [int(a) for a in args]
            except ValueError:
                raise MachineSyntaxError(f"non-integer argument in {chunk.strip()!r}", line_no) from None
            arity = {"inc": 1, "dec": 1, "jz": 2, "halt": 0}.get(op)
            if arity is None:
                raise MachineSyntaxError(f"unknown instruction {op!r}", line_no)
            if len(nums) != arity:
                raise MachineSyntaxError(f"'{op}' takes {arity} argument(s)", line_no)
            if op == "inc":
                instructions.append(Inc(nums[0]))
            elif op == "dec":
                instructions.append(Dec(nums[0]))
            elif op == "jz":
                instructions.append(Jz(nums[0], nums[1]))
            else:
                instructions.append(Halt())
    if not instructions or not isinstance(instructions[-1], Halt):
        raise MissingHalt("final instruction must be 'halt'")
    return MinskyMachine(tuple(instructions), name=name)


def format_machine(m: MinskyMachine) -> str:
    lines = []
    for ins in m.instructions:
        if isinstance(ins, Inc):
            lines.append(f"inc {ins.k}")
        elif isinstance(ins, Dec):
            lines.append(f"dec {ins.k}")
        elif isinstance(ins, Jz):
            lines.append(f"jz {ins.k} {ins.j}")
        else:
            lines.append("halt")
    return "\n".join(lines) + "\n"


def step(m: MinskyMachine, cfg: MinskyConfig) -> Optional[MinskyConfig]:
    """Successor configuration, or None if ``cfg`` is halted (q == n)."""
    if not 1 <= cfg.q <= m.n:
        raise ValueError(f"instruction index {cfg.q} outside [1, {m.n}]")
    ins = m[cfg.q]
    if isinstance(ins, Halt):
        return None
    if isinstance(ins, Inc):
        c = [cfg.c1, cfg.c2]
        c[ins.k - 1] += 1
        return MinskyConfig(cfg.q + 1, c[0], c[1])
    if isinstance(ins, Dec):
        c = [cfg.c1, cfg.c2]
        if c[ins.k - 1] == 0:
            raise IllFormed(f"dec {ins.k} at q={cfg.q} with c{ins.k} = 0")
        c[ins.k - 1] -= 1
        return MinskyConfig(cfg.q + 1, c[0], c[1])
    if cfg.counter(ins.k) == 0:
        return MinskyConfig(ins.j, cfg.c1, cfg.c2)
    return MinskyConfig(cfg.q + 1, cfg.c1, cfg.c2)


def run(m: MinskyMachine, t_max: int) -> MinskyTrace:
    """Run from (q=1, 0, 0) for at most ``t_max`` steps, stopping at halt."""
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    cfg = INITIAL
    configs = [cfg]
    for t in range(t_max + 1):
        if cfg.q == m.n:
            return MinskyTrace(tuple(configs), halted_at=t)
        if t == t_max:
            break
        cfg = step(m, cfg)
        configs.append(cfg)
    return MinskyTrace(tuple(configs), None)
