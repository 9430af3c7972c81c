"""Multi-talker ASR and diarization with a separator plugged into a frozen encoder."""

__version__ = "0.1.0"
