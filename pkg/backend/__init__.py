"""dumpscrub backend."""
