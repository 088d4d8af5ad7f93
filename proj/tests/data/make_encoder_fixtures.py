"""Regenerates the tiny ONNX encoders, tokenizer files and reference pack under encoders/.

Reference embeddings are computed with numpy (plus PIL for resizing and the Hugging Face
CLIP tokenizer for token ids), independently of the C++ code under test.

    python3 make_encoder_fixtures.py
"""

import json
import struct
from collections import Counter
from pathlib import Path

import numpy as np
import onnx
from onnx import TensorProto, helper, numpy_helper
from PIL import Image

OUT = Path(__file__).resolve().parent / "encoders"
DIM = 16
CROP = 8
CTX = 16
WIDTH = 8
MEAN = [0.48145466, 0.4578275, 0.40821073]
STD = [0.26862954, 0.26130258, 0.27577711]

rng = np.random.default_rng(20240611)


def write_pvx1(path, matrix, ids):
    matrix = np.ascontiguousarray(matrix, dtype="<f4")
    rows, dim = matrix.shape
    with open(path, "wb") as f:
        f.write(b"PVX1" + struct.pack("<HBII", 1, 1, rows, dim) + matrix.tobytes())
    Path(str(path) + ".ids.json").write_text(json.dumps(ids, indent=2) + "\n")


def save_model(graph, path):
    model = helper.make_model(graph, opset_imports=[helper.make_opsetid("", 11)], producer_name="privlex-fixtures")
    model.ir_version = 6
    onnx.checker.check_model(model)
    onnx.save(model, path)


# --- image encoder -------------------------------------------------------

w_img = rng.normal(0, 0.05, size=(3 * CROP * CROP, DIM)).astype(np.float32)
b_img = rng.normal(0, 0.1, size=(DIM,)).astype(np.float32)

graph = helper.make_graph(
    [
        helper.make_node("Flatten", ["pixel_values"], ["flat"], axis=1),
        helper.make_node("MatMul", ["flat", "w"], ["proj"]),
        helper.make_node("Add", ["proj", "b"], ["image_embeds"]),
    ],
    "tiny_image_encoder",
    [helper.make_tensor_value_info("pixel_values", TensorProto.FLOAT, ["batch", 3, CROP, CROP])],
    [helper.make_tensor_value_info("image_embeds", TensorProto.FLOAT, ["batch", DIM])],
    [numpy_helper.from_array(w_img, "w"), numpy_helper.from_array(b_img, "b")],
)
OUT.mkdir(parents=True, exist_ok=True)
save_model(graph, OUT / "image.onnx")
(OUT / "image.onnx.manifest.json").write_text(
    json.dumps(
        {
            "modality": "image",
            "reported_dim": DIM,
            "checkpoint": "fixture/tiny-image-v1",
            "input_name": "pixel_values",
            "output_name": "image_embeds",
            "image": {
                "resize_shortest": CROP,
                "crop": CROP,
                "interpolation": "bicubic",
                "rescale": 1.0 / 255.0,
                "mean": MEAN,
                "std": STD,
            },
        },
        indent=2,
    )
    + "\n"
)

img_dir = OUT / "images"
img_dir.mkdir(exist_ok=True)
exact_ids = []
for k in range(4):
    px = rng.integers(0, 256, size=(CROP, CROP, 3), dtype=np.uint8)
    Image.fromarray(px, "RGB").save(img_dir / f"noise{k}.png")
    exact_ids.append(f"noise{k}")
# Smooth landscape image that needs resize + centre crop.
yy, xx = np.mgrid[0:12, 0:16]
grad = np.stack([xx * 15, yy * 20, 255 - xx * 8 - yy * 6], axis=-1).clip(0, 255).astype(np.uint8)
Image.fromarray(grad, "RGB").save(img_dir / "gradient.png")
(img_dir / "broken.png").write_bytes(b"this is not an image\n")
(OUT / "images.txt").write_text(
    "".join(f"images/{i}.png\n" for i in exact_ids) + "images/broken.png\ngradient\timages/gradient.png\n"
)


def preprocess(path):
    im = Image.open(path).convert("RGB")
    w, h = im.size
    if w <= h:
        nw, nh = CROP, int(CROP * h / w)
    else:
        nw, nh = int(CROP * w / h), CROP
    if (nw, nh) != (w, h):
        im = im.resize((nw, nh), Image.BICUBIC)
    top = int(round((nh - CROP) / 2.0))
    left = int(round((nw - CROP) / 2.0))
    im = im.crop((left, top, left + CROP, top + CROP))
    x = np.asarray(im, dtype=np.float64) / 255.0
    x = (x - np.array(MEAN)) / np.array(STD)
    return x.transpose(2, 0, 1).astype(np.float32)


ref_ids = exact_ids + ["gradient"]
pix = np.stack([preprocess(img_dir / f"{i}.png") for i in ref_ids])
ref_img = pix.reshape(len(ref_ids), -1).astype(np.float64) @ w_img.astype(np.float64) + b_img
ref_dir = OUT / "reference"
ref_dir.mkdir(exist_ok=True)
write_pvx1(ref_dir / "images.pvx1", ref_img, ref_ids)

# --- tokenizer -------------------------------------------------------------


def bytes_to_unicode():
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("¡"), ord("¬") + 1)) + list(range(ord("®"), ord("ÿ") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, map(chr, cs)))


corpus = (
    "personal data passport identity document credit card number face person photo address "
    "phone email health medical record location home vehicle license plate signature "
    "information about private public children family religion ethnicity"
).split()
words = Counter(tuple(w[:-1]) + (w[-1] + "</w>",) for w in corpus)
merges = []
for _ in range(60):
    pairs = Counter()
    for word, freq in words.items():
        for a, b in zip(word, word[1:]):
            pairs[(a, b)] += freq
    if not pairs:
        break
    best = min(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    merges.append(best)
    merged = Counter()
    for word, freq in words.items():
        out, i = [], 0
        while i < len(word):
            if i + 1 < len(word) and (word[i], word[i + 1]) == best:
                out.append(word[i] + word[i + 1])
                i += 2
            else:
                out.append(word[i])
                i += 1
        merged[tuple(out)] += freq
    words = merged

base = list(bytes_to_unicode().values())
vocab_list = base + [v + "</w>" for v in base] + ["".join(m) for m in merges] + ["<|startoftext|>", "<|endoftext|>"]
vocab = {tok: i for i, tok in enumerate(vocab_list)}
(OUT / "vocab.json").write_text(json.dumps(vocab, ensure_ascii=False) + "\n")
(OUT / "merges.txt").write_text("#version: 0.2\n" + "".join(f"{a} {b}\n" for a, b in merges))

from transformers import CLIPTokenizer  # noqa: E402

tok = CLIPTokenizer(str(OUT / "vocab.json"), str(OUT / "merges.txt"))
cases = [
    "passport: identity document",
    "Credit card numbers!",
    "face: a person's face, e.g. photo",
    "it's 2024 now",
    "  multiple   spaces\tand\nTabs ",
    "e-mail address, phone (home)",
    "naïve café",
    "license plate: information about license plate",
    "",
]
token_cases = [{"text": t, "ids": tok(t, add_special_tokens=False)["input_ids"]} for t in cases]
(OUT / "tokenizer_cases.json").write_text(json.dumps(token_cases, indent=2, ensure_ascii=False) + "\n")

# --- text encoder ------------------------------------------------------------

table = rng.normal(0, 0.5, size=(len(vocab), WIDTH)).astype(np.float32)
write_pvx1(OUT / "token_embeddings.pvx1", table, [str(i) for i in range(len(vocab))])
pos = rng.normal(0, 0.2, size=(CTX, WIDTH)).astype(np.float32)
w_txt = rng.normal(0, 0.4, size=(WIDTH, DIM)).astype(np.float32)
b_txt = rng.normal(0, 0.1, size=(DIM,)).astype(np.float32)

graph = helper.make_graph(
    [
        helper.make_node("Add", ["token_embeds", "pos"], ["x"]),
        helper.make_node("Tanh", ["x"], ["h"]),
        helper.make_node("MatMul", ["h", "w"], ["proj"]),
        helper.make_node("Add", ["proj", "b"], ["text_embeds"]),
    ],
    "tiny_text_encoder",
    [helper.make_tensor_value_info("token_embeds", TensorProto.FLOAT, ["batch", CTX, WIDTH])],
    [helper.make_tensor_value_info("text_embeds", TensorProto.FLOAT, ["batch", CTX, DIM])],
    [numpy_helper.from_array(pos, "pos"), numpy_helper.from_array(w_txt, "w"), numpy_helper.from_array(b_txt, "b")],
)
save_model(graph, OUT / "text.onnx")
PAD = 0
(OUT / "text.onnx.manifest.json").write_text(
    json.dumps(
        {
            "modality": "text",
            "reported_dim": DIM,
            "checkpoint": "fixture/tiny-text-v1",
            "input_name": "token_embeds",
            "output_name": "text_embeds",
            "text": {
                "tokenizer": {"type": "clip-bpe", "vocab": "vocab.json", "merges": "merges.txt"},
                "context_length": CTX,
                "pad_id": PAD,
                "input_kind": "token_embeddings",
                "token_embeddings": "token_embeddings.pvx1",
                "pooling": "eot",
            },
        },
        indent=2,
    )
    + "\n"
)

prompts = [
    ("passport", "passport: identity document"),
    ("credit_card", "credit card: credit card number"),
    ("face", "face: a person's face, e.g. photo"),
    ("home_address", "home address: information about home address"),
    ("long", "medical record health information about family religion ethnicity children vehicle"),
]
(OUT / "prompts.jsonl").write_text(
    "".join(json.dumps({"concept_id": c, "text": t}) + "\n" for c, t in prompts)
)
sot, eot = vocab["<|startoftext|>"], vocab["<|endoftext|>"]
rows = []
for _, text in prompts:
    ids = tok(text, add_special_tokens=False)["input_ids"][: CTX - 2]
    seq = [sot] + ids + [eot]
    seq += [PAD] * (CTX - len(seq))
    h = np.tanh(table[seq].astype(np.float64) + pos)
    out = h @ w_txt.astype(np.float64) + b_txt
    rows.append(out[seq.index(eot)])
write_pvx1(ref_dir / "texts.pvx1", np.array(rows), [c for c, _ in prompts])
print("wrote", OUT)
