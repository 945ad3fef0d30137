"""Fixed inputs shared by the acceptance gate and the unit tests."""

WORKED = "p1 & <fc> count(ns*; p2) > 1"

# (formula, expected status)
FORMULAS = [
    (WORKED, "SAT"),
    ("p1 & <fc> count(ns*; p2) > 2", "SAT"),
    ("p & ~p", "UNSAT"),
    ("p & count((par|ps)*, (fc|ns)*; p) <= 0", "UNSAT"),
    ("a & <fc> count(ns*; b) > 3 & <fc> count(ns*; b) <= 9", "SAT"),
    ("a & <fc> count(ns*; b) > 3 & <fc> count(ns*; b) <= 3", "UNSAT"),
    ("count((par|ps)*, (fc|ns)*; b) > 2 & a", "SAT"),
    ("@n & <fc> (n & <ns> n)", "UNSAT"),
    ("@n & a & <fc> (b & mu x. n | <ns> x)", "SAT"),
    ("mu x. (b & ~<fc>T) | <fc> x", "SAT"),
    ("(mu x. p | <fc> x) & ~(mu y. p | <fc> y)", "UNSAT"),
    ("<par> T & <ps> T", "UNSAT"),
    ("<par> <ps> (a & <fc> T)", "SAT"),
    ("a & <fc> (count(ns*; b) > 2 & <ns> c)", "SAT"),
    ("a & count(fc, ns*; b & <fc> c) > 1", "SAT"),
    ("a & count(fc, (fc|ns)*; b) > 2 & count(fc, ns*; b) <= 0", "SAT"),
    ("a & count((fc|ns)*; b) > 1 & count((fc|ns)*; b) <= 1", "UNSAT"),
    ("mu x. (a & <fc> count(ns*; b) > 1) | <fc> x | <ns> x", "SAT"),
    ("b & <par> (a & <fc> count(ns*; b) <= 0)", "UNSAT"),
    ("count(ps*, par; a) > 0 & count(ps*; b) > 1", "SAT"),
    ("a & ~<fc>T & count((par|ps)*, (fc|ns)*; b) > 0", "SAT"),
    ("(a | b) & <fc>(~a & ~b) & <fc><ns>(a & <ns> b)", "SAT"),
]

# (e1, e2, contains)
XPATH_PAIRS = [
    ("child::a", "descendant::a", True),
    ("descendant::a", "child::a", False),
    ("child::a[count(child::b)>1]", "child::a[child::b]", True),
    ("child::a[child::b]", "child::a[count(child::b)>1]", False),
    ("child::a/child::b[count(child::e/descendant::h)>3]", "child::a/child::b", True),
    ("following-sibling::a", "following::a", True),
    ("following::a", "following-sibling::a", False),
    ("/descendant::a", "descendant::a", False),
    ("child::a", "/descendant::a", True),
    ("parent::*/child::a", "self::a | preceding-sibling::a | following-sibling::a", True),
    ("child::a", "child::a[count(child::b)<=0]", False),
]

XPATH_EXPRESSIONS = [
    "child::a", "descendant::b[parent::a]", "child::*/following-sibling::b", "preceding::a",
    "following::b[not(child::a)]", "ancestor::a[count(child::b)>1]", "child::a[position()=2]",
    "(child::a | child::b)/child::c", "parent::*/child::b[count(descendant::c)>=2]",
    "child::a[count(preceding-sibling::*)=1]", "descendant::c[count(following-sibling::a)<=0]",
    "self::a[child::b and not(child::c)]", "ancestor::*/preceding-sibling::b",
    "descendant::a[count(child::*)>=2 or child::c]", "/descendant::b[position()=1]",
    "child::a/child::b[count(child::c/descendant::a)>1]",
    "descendant::*[count(child::b)=2] except descendant::a",
]
