//! Holds the `acceptance` test target, which checks the numerical claims of
//! `prvem` end to end and prints one PASS/FAIL line per criterion.
