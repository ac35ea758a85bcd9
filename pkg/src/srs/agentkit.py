"""Module registration plus the desk-scale demo agent skills.

A ModuleDef bundles namespaced slots, signals, and rules; registering one is
atomic. ``build_demo_agent`` wires the stock conversational skills:

- hibye: greets and bids farewell on matching input, resigns otherwise
- parrotqa: tags question inputs, answers known topics, resigns on unknown
- wildtalk: canned fallback replies (zero-information clause)
- emotion: writes a facial-expression slot in parallel with the talkers
- idle: emits bored/impatient signals from sustained activity transitions
- fillers: voices a stalling phrase when processing runs long
- promptloop: asks a question when bored, re-asks on a detached loop, or
  accepts an answer

Skill bodies keep no mutable state outside slots; phrase choice comes from a
seeded phrase book.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .condition import signal
from .core import EmitSpec, ResultFlag, Rule, SignalSpec
from .errors import ConfigurationError
from .phrases import PhraseBook
from .scheduler import Context, EngineConfig

RAWIO_IN = "rawio:in"
RAWIO_OUT = "rawio:out"
EXPR_SLOT = "emotion:expr"

_QUESTION_STARTERS = {
    "what", "who", "why", "how", "when", "where", "which", "whose",
    "do", "does", "did", "is", "are", "am", "can", "could", "would",
    "will", "should", "have", "has",
}

_GREETINGS = ("hello", "hi", "hey", "greetings", "good morning",
              "good evening", "howdy")
_FAREWELLS = ("bye", "goodbye", "farewell", "see you", "good night")

_TOPICS = {
    "name": "They call me Parrot.",
    "color": "Green, obviously.",
    "weather": "It is always sunny in here.",
    "age": "I hatched about one year ago.",
    "hobby": "I collect shiny rules.",
}


def looks_like_question(text: str) -> bool:
    s = text.strip().lower()
    if not s:
        return False
    return s.endswith("?") or s.split()[0] in _QUESTION_STARTERS


def mentions_any(text: str, phrases) -> bool:
    """Word-boundary phrase matching ('hi' must not match 'something')."""
    words = set(re.findall(r"[a-z']+", text.lower()))
    for phrase in phrases:
        if " " in phrase:
            if phrase in text.lower():
                return True
        elif phrase in words:
            return True
    return False


@dataclass
class ModuleDef:
    """A named bundle of slots, signals, and rules; registered atomically."""

    name: str
    slots: list[tuple[str, Any]] = field(default_factory=list)
    signals: list[SignalSpec] = field(default_factory=list)
    rules: list[Rule] = field(default_factory=list)
    config: dict[str, Any] = field(default_factory=dict)

    def qualify(self, item: str) -> str:
        return item if ":" in item else f"{self.name}:{item}"

    def slot(self, item: str, value: Any = None) -> str:
        name = self.qualify(item)
        self.slots.append((name, value))
        return name

    def signal(self, item: str, **kwargs: Any) -> str:
        sid = self.qualify(item)
        self.signals.append(SignalSpec(sid, **kwargs))
        return sid

    def uses(self, sid: str, **kwargs: Any) -> str:
        """Declare a dependency on another module's signal.

        Registration dedupes identical declarations, so a module stays
        loadable when its upstream peer is absent.
        """
        self.signals.append(SignalSpec(sid, **kwargs))
        return sid

    def rule(self, item: str, condition, body, reads: Iterable[str] = (),
             writes: Iterable[str] = (), emits: Iterable[EmitSpec] = ()) -> Rule:
        rule = Rule(self.qualify(item), condition, body,
                    read_slots=reads, write_slots=writes, emits=emits)
        self.rules.append(rule)
        return rule


def register_module(ctx: Context, module: ModuleDef) -> None:
    """Add the module's slots, signals, and rules; all or nothing."""
    if ctx._in_tick:
        raise ConfigurationError("cannot register a module mid-tick")
    snapshot = (dict(ctx.slots), dict(ctx.signals), list(ctx.rules),
                dict(ctx._rules_by_name))
    try:
        for name, value in module.slots:
            ctx.add_slot(name, value)
        for spec in module.signals:
            existing = ctx.signals.get(spec.sid)
            if existing is not None:
                if existing != spec:
                    raise ConfigurationError(
                        f"signal {spec.sid!r} redeclared with different spec")
                continue
            ctx.add_signal(spec)
        for rule in module.rules:
            ctx.add_rule(rule)
        ctx.prepare()
    except Exception:
        ctx.slots, ctx.signals, ctx.rules, ctx._rules_by_name = snapshot
        for i, rule in enumerate(ctx.rules):
            rule.index = i
        ctx._dirty = True
        raise


@dataclass
class AgentConfig:
    """Demo agent knobs, all in ticks."""

    bored_after: int = 40
    impatient_after: int = 10
    reask_after: int = 25
    prompt_expires_after: int = 60
    phrases: Optional[PhraseBook] = None


def rawio_module() -> ModuleDef:
    m = ModuleDef("rawio")
    m.slot("in")
    m.slot("out")
    return m


def hibye_module(book: PhraseBook) -> ModuleDef:
    m = ModuleDef("hibye")

    def greet(reads, writes, triggers):
        text = reads[RAWIO_IN] or ""
        if mentions_any(text, _GREETINGS):
            writes[RAWIO_OUT] = book.pick("greeting")
        elif mentions_any(text, _FAREWELLS):
            writes[RAWIO_OUT] = book.pick("farewell")
        else:
            return ResultFlag.RESIGN

    m.rule("greet", signal("rawio:in:changed"), greet,
           reads=[RAWIO_IN], writes=[RAWIO_OUT])
    return m


def parrotqa_module() -> ModuleDef:
    m = ModuleDef("parrotqa")
    question = m.signal("question")

    def detect(reads, writes, triggers):
        text = reads[RAWIO_IN] or ""
        if looks_like_question(text):
            writes.emit(question, payload=text)

    def answer(reads, writes, triggers):
        text = (triggers.payload(question) or "").lower()
        for topic, reply in _TOPICS.items():
            if topic in text:
                writes[RAWIO_OUT] = reply
                return None
        return ResultFlag.RESIGN

    m.rule("detect", signal("rawio:in:changed"), detect,
           reads=[RAWIO_IN], emits=[EmitSpec(question)])
    m.rule("answer", signal(question), answer, writes=[RAWIO_OUT])
    return m


def wildtalk_module(book: PhraseBook) -> ModuleDef:
    m = ModuleDef("wildtalk")

    def reply(reads, writes, triggers):
        writes[RAWIO_OUT] = book.pick("wildtalk")

    m.rule("reply", signal("rawio:in:changed"), reply, writes=[RAWIO_OUT])
    return m


def emotion_module() -> ModuleDef:
    m = ModuleDef("emotion")
    m.slot("expr", "neutral")

    def express(reads, writes, triggers):
        text = reads[RAWIO_IN] or ""
        if mentions_any(text, ("you", "your", "yours")):
            writes[EXPR_SLOT] = "shy"
        elif mentions_any(text, _GREETINGS):
            writes[EXPR_SLOT] = "smile"
        elif looks_like_question(text):
            writes[EXPR_SLOT] = "curious"
        else:
            writes[EXPR_SLOT] = "neutral"

    m.rule("express", signal("rawio:in:changed"), express,
           reads=[RAWIO_IN], writes=[EXPR_SLOT])
    return m


def idle_module(cfg: AgentConfig) -> ModuleDef:
    """Awkward-pause detection: bored silence and impatient processing.

    Boredom: the engine wipes superseded activity:changed spikes, so a
    transition spike reaching the watch age means the count held that long.

    Impatience: the watch contends for the output slot on every input spike.
    A prompt reply within the patience window consumes the input's group for
    the slot and thereby cleans the watch up; otherwise the watch fires,
    emits the impatient signal detached (a filler must not steal the input
    group's output claim), and resigns so the real responder, however slow,
    still owns the reply.
    """
    m = ModuleDef("idle")
    bored = m.signal("bored")
    impatient = m.signal("impatient")

    def watch_bored(reads, writes, triggers):
        if reads["activity"] == 0:
            writes.emit(bored)

    def watch_impatient(reads, writes, triggers):
        writes.emit(impatient)
        return ResultFlag.RESIGN

    m.rule("bored_watch",
           signal("activity:changed", min_age=cfg.bored_after),
           watch_bored, reads=["activity"], emits=[EmitSpec(bored)])
    m.rule("impatient_watch",
           signal("rawio:in:changed", min_age=cfg.impatient_after),
           watch_impatient, writes=[RAWIO_OUT],
           emits=[EmitSpec(impatient, detached=True)])
    return m


def fillers_module(book: PhraseBook) -> ModuleDef:
    m = ModuleDef("fillers")
    impatient = m.uses("idle:impatient")

    def fill(reads, writes, triggers):
        writes[RAWIO_OUT] = book.pick("filler")

    m.rule("fill", signal(impatient), fill, writes=[RAWIO_OUT])
    return m


def promptloop_module(book: PhraseBook, cfg: AgentConfig) -> ModuleDef:
    """Ask-when-bored with a detached re-ask loop.

    The prompted signal is emitted detached so it founds a fresh causal
    group: the loop can re-trigger the asking side, and an answer can still
    write the output slot its own cause group already used.
    """
    if cfg.reask_after >= cfg.prompt_expires_after:
        raise ConfigurationError(
            "prompt_expires_after must exceed reask_after")
    m = ModuleDef("promptloop")
    prompted = m.signal("prompted")
    bored = m.uses("idle:bored")
    expire = cfg.prompt_expires_after

    def ask(reads, writes, triggers):
        writes[RAWIO_OUT] = book.pick("prompt")
        writes.emit(prompted)

    def reask(reads, writes, triggers):
        writes[RAWIO_OUT] = book.pick("reask")
        writes.emit(prompted)

    def answered(reads, writes, triggers):
        writes[RAWIO_OUT] = book.pick("answered")

    m.rule("ask", signal(bored), ask,
           writes=[RAWIO_OUT], emits=[EmitSpec(prompted, detached=True)])
    m.rule("reask",
           signal(prompted, min_age=cfg.reask_after, max_age=expire),
           reask, writes=[RAWIO_OUT], emits=[EmitSpec(prompted, detached=True)])
    m.rule("answered",
           signal(prompted, max_age=expire) & signal("rawio:in:changed"),
           answered, reads=[RAWIO_IN], writes=[RAWIO_OUT])
    return m


DEMO_SKILLS = ("hibye", "parrotqa", "wildtalk", "emotion", "idle", "fillers",
               "promptloop")


def build_demo_agent(engine: Optional[EngineConfig] = None,
                     agent: Optional[AgentConfig] = None,
                     skills: Iterable[str] = DEMO_SKILLS,
                     trace=None) -> Context:
    """A Context wired with the stock demo skills (rawio always included)."""
    engine = engine or EngineConfig()
    agent = agent or AgentConfig()
    book = agent.phrases or PhraseBook.builtin(seed=engine.seed)
    ctx = Context(engine, trace=trace)
    register_module(ctx, rawio_module())
    factories = {
        "hibye": lambda: hibye_module(book),
        "parrotqa": parrotqa_module,
        "wildtalk": lambda: wildtalk_module(book),
        "emotion": emotion_module,
        "idle": lambda: idle_module(agent),
        "fillers": lambda: fillers_module(book),
        "promptloop": lambda: promptloop_module(book, agent),
    }
    for name in skills:
        if name not in factories:
            raise ConfigurationError(f"unknown demo skill {name!r}")
        register_module(ctx, factories[name]())
    ctx.prepare()
    return ctx
