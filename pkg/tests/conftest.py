from pathlib import Path

import pytest
from hypothesis import strategies as st

from evomelody.abc import PITCHES, REST, Token, Tune

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@st.composite
def token_strategy(draw) -> Token:
    """Any valid Token: rests are undecorated, octave marks follow case."""
    pitch = draw(st.sampled_from(PITCHES + REST))
    duration = draw(st.integers(1, 4))
    if pitch == REST:
        return Token(pitch=REST, duration=duration)
    accidental = draw(st.sampled_from(["", "^", "_"]))
    if pitch.isupper():
        shift = draw(st.integers(-2, 0))
    else:
        shift = draw(st.integers(0, 2))
    return Token(pitch=pitch, accidental=accidental, octave_shift=shift,
                 duration=duration)


def make_tune(tune_id: str, tokens) -> Tune:
    return Tune(id=tune_id, body=tuple(tokens))


def notes(text: str) -> tuple[Token, ...]:
    """Shorthand: one Token per whitespace-separated ABC note."""
    from evomelody.abc import tokenize
    return tuple(tokenize(text))
