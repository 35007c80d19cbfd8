"""Tests for ReviewerCalls discovery system."""
