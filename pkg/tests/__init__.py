"""Tests for the localq-cert toolkit."""
