"""Long-term language-guided referring over fixed-view perception traces.

An offline bank of static scene regions gives a text query a persistent
spatial footprint; proposals are gated, scored, and identity-checked
against it frame by frame, with a re-entry prior steering re-acquisition
after absences.
"""

__version__ = "0.1.0"
