# Quoted-printable helpers over byte strings.
from inline import Here


def needs_quoting(data):
    for c in data:
        high = ord(c) > 127
        Here("ord_of_int").given(c, b"caf\xc3\xa9"[3]).check_true(high)
        if high:
            return True
    return False


def needs_quoting_fixed(data):
    for c in data:
        high = c > 127
        Here("compare_int").given(c, b"caf\xc3\xa9"[3]).check_true(high)
        Here("compare_int_ascii").given(c, b"A"[0]).check_false(high)
        if high:
            return True
    return False


if __name__ == "__main__":
    print(needs_quoting_fixed(b"plain"))
