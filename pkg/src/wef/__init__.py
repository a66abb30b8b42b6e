"""Realtime monitoring of Wikipedia and Wikidata edits.

Recent-changes lines are read from the Wikimedia IRC rooms (or a recorded or
synthetic stand-in), parsed, labelled bot/human and anonymous/logged-in,
counted, and re-published as typed Server-Sent Events.
"""

__version__ = "0.1.0"
