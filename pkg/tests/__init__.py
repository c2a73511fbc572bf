"""
Test package for preqsim
"""
