"""Drive the command-line pipeline end to end on a small config.

Equivalent shell session:

    typsgd gen       --config demos/configs/small_clustered.ini --mkdir
    typsgd partition --config demos/configs/small_clustered.ini
    typsgd train     --config demos/configs/small_clustered.ini
    typsgd verify    --config demos/configs/small_clustered.ini
    typsgd report    --config demos/configs/small_clustered.ini
"""

import os

from typsgd.cli import main

config = os.path.join(os.path.dirname(__file__), "configs", "small_clustered.ini")

for command in ("gen", "partition", "train", "verify", "report"):
    print(f"$ typsgd {command} --config {os.path.relpath(config)} --mkdir")
    code = main([command, "--config", config, "--mkdir"])
    print(f"  -> exit {code}")
    assert code == 0, command

out_dir = os.path.join(os.path.dirname(__file__), "out", "cli")
print(f"artifacts in {out_dir}:")
for name in sorted(os.listdir(out_dir)):
    print(f"  {name}")
