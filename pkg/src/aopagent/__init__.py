"""Active omni-modal perception over long videos.

Builds a hierarchical memory (fine clips, annotated mid segments, a global
description) from an ASR transcript, then answers multi-hop questions with a
planner / observation-tools / reflector / reasoner loop.
"""

__version__ = "0.1.0"
