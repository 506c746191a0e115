"""Test suite for dumpscrub."""
