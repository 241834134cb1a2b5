"""5G NR SSB jamming simulator: link-level cell search under attack and a
system-level cell model with HARQ and mobility."""

__version__ = "0.1.0"
