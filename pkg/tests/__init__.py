"""
ergojump Tests
"""
