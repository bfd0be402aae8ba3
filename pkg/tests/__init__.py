"""Test suite for movmax."""
