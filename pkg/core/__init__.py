"""
Core-Module für fsCLF-MPC

Orchestrator, Persistenz und Fehlerhierarchie; der Orchestrator wird direkt
aus core.orchestrator importiert, da er alle Modelle und Services lädt.
"""
