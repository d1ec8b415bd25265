# Tests for enskog-mild
