"""Re-encodes every instruction in gas_reference.tsv with GNU as (16-bit mode)
and rewrites the byte column. Run from this directory."""
import os
import re
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor


def to_gas(text):
    g = text.replace("WORD [", "WORD PTR [").replace("BYTE [", "BYTE PTR [")
    if g.startswith("call far "):
        g = "lcall " + g[len("call far "):]
    g = re.sub(r"^(jmp|call) \[", r"\1 WORD PTR [", g)
    g = re.sub(r"^(les|lds) (\w+), \[", r"\1 \2, DWORD PTR [", g)
    g = re.sub(r"^xlat$", "xlatb", g)
    g = re.sub(r"^(rep|repne) (\w+)$", r"\1; \2", g)
    return g


def assemble(text):
    d = tempfile.mkdtemp()
    src, obj, raw = (os.path.join(d, n) for n in ("a.s", "a.o", "a.bin"))
    with open(src, "w") as f:
        f.write(".code16\n.intel_syntax noprefix\n" + to_gas(text) + "\n")
    subprocess.run(["as", "--32", "-o", obj, src], check=True)
    subprocess.run(["objcopy", "-O", "binary", "-j", ".text", obj, raw], check=True)
    with open(raw, "rb") as f:
        return " ".join("%02x" % b for b in f.read())


texts = [line.split("\t")[0] for line in open("gas_reference.tsv")]
with ThreadPoolExecutor(16) as ex:
    rows = list(ex.map(lambda t: (t, assemble(t)), texts))
with open("gas_reference.tsv", "w") as f:
    for t, b in rows:
        f.write(f"{t}\t{b}\n")
