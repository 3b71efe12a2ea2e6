"""Shared models for the hscaler service surface"""
