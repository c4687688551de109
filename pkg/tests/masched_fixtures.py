from masched.automata import ExplicitMA

# Two-phase race model: an initial choice between actions a and b, then a
# chain of exponential phases. State encoding: loc 0 = initial choice,
# loc 1 = the two-rate race state, loc 2 = the countdown phases; s is the
# phase counter. Reachable states: (0,0), (1,0), (2,2), (2,1), (2,0).
RACE_MODEL_TEXT = """
process Race {
  int(0..2) loc = 0;
  int(0..2) s = 0;

  [a] when loc == 0 -> 0.5: { loc = 2, s = 2 } + 0.5: { loc = 2, s = 1 };
  [b] when loc == 0 -> 1: { loc = 1 };
  rate(3) when loc == 1 -> { loc = 2, s = 2 };
  rate(4) when loc == 1 -> { loc = 2, s = 0 };
  rate(s) when loc == 2 && s >= 1 -> { s = s - 1 };
  rate(1) when loc == 2 && s == 0 -> {};
}
"""

RACE_INITIAL = (0, 0)
RACE_B = (1, 0)  # the state with the rate-3 / rate-4 race
RACE_X = (2, 0)  # the self-loop sink phase




def make_absorbing_clock(rate=1.0, rate_reward=1.0):
    """Single Markovian state with a self-loop: accumulates rate reward
    until the bound, exactly."""
    ma = ExplicitMA("tick")
    ma.add_rate("tick", rate, "tick")
    ma.set_rate_reward("tick", rate_reward)
    return ma


def make_coin_reward(p=0.5, reward=2.0, sink_rate=1.0):
    """One probabilistic state paying `reward` with probability p, then an
    absorbing Markovian sink; expected run reward is p * reward."""
    ma = ExplicitMA("flip", observation=lambda s: (0,))
    ma.add_choice("flip", "go", [(p, "sink", reward), (1 - p, "sink", 0.0)])
    ma.add_rate("sink", sink_rate, "sink")
    return ma


def make_dag_mdp():
    """Three decision states over a Markovian sink; the optimum is known.

    start: 'left'  -> 0.5 mid(+2), 0.5 alt(+0)
           'right' -> 0.2 mid(+1), 0.8 alt(+3)
    mid:   'hi' -> sink +4    'lo' -> sink +1
    alt:   'hi' -> sink +0    'lo' -> sink +2.5

    Best: right, then hi at mid and lo at alt:
    0.2*(1+4) + 0.8*(3+2.5) = 5.4.
    """
    ma = ExplicitMA(
        "start",
        observation=lambda s: ({"start": 0, "mid": 1, "alt": 2, "sink": 3}[s],),
    )
    ma.add_choice("start", "left", [(0.5, "mid", 2.0), (0.5, "alt", 0.0)])
    ma.add_choice("start", "right", [(0.2, "mid", 1.0), (0.8, "alt", 3.0)])
    ma.add_choice("mid", "hi", [(1.0, "sink", 4.0)])
    ma.add_choice("mid", "lo", [(1.0, "sink", 1.0)])
    ma.add_choice("alt", "hi", [(1.0, "sink", 0.0)])
    ma.add_choice("alt", "lo", [(1.0, "sink", 2.5)])
    ma.add_rate("sink", 1.0, "sink")
    return ma


def dag_mdp_optimum(direction="max"):
    """Brute force over all deterministic policies, exact expectations."""
    best = None
    for start_choice in ("left", "right"):
        for mid_choice in ("hi", "lo"):
            for alt_choice in ("hi", "lo"):
                mid_value = {"hi": 4.0, "lo": 1.0}[mid_choice]
                alt_value = {"hi": 0.0, "lo": 2.5}[alt_choice]
                if start_choice == "left":
                    value = 0.5 * (2.0 + mid_value) + 0.5 * (0.0 + alt_value)
                else:
                    value = 0.2 * (1.0 + mid_value) + 0.8 * (3.0 + alt_value)
                if best is None:
                    best = value
                elif direction == "max":
                    best = max(best, value)
                else:
                    best = min(best, value)
    return best
