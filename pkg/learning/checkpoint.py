import logging
import os
import struct
from dataclasses import asdict, fields

import numpy as np
import torch

from core.exceptions import ParameterError
from folding.serializers import parse_json, render_json
from .sac import LearnerConfig, SACAgent

logger = logging.getLogger(__name__)

MAGIC = b'CLFD'
VERSION = 1
HEADER = struct.Struct('<4sHI')
FLOAT = np.dtype('<f4')


def encode_checkpoint(agent, epoch=0, extra=None):
    tensors = agent.named_tensors()
    manifest = {
        'version': VERSION,
        'mode': agent.mode,
        'seed': agent.seed,
        'epoch': epoch,
        'config': asdict(agent.config),
        'layers': [{'name': name, 'shape': list(tensor.shape)} for name, tensor in tensors],
        'extra': extra or {},
    }
    header = render_json(manifest)
    chunks = [HEADER.pack(MAGIC, VERSION, len(header)), header]
    for _, tensor in tensors:
        chunks.append(tensor.detach().cpu().numpy().astype(FLOAT).tobytes())
    return b''.join(chunks)


def decode_checkpoint(content):
    if len(content) < HEADER.size:
        raise ParameterError('checkpoint is truncated')
    magic, version, length = HEADER.unpack_from(content)
    if magic != MAGIC:
        raise ParameterError(f'not a checkpoint file (magic {magic!r})')
    if version != VERSION:
        raise ParameterError(f'unsupported checkpoint version {version}')
    manifest = parse_json(content[HEADER.size:HEADER.size + length])

    offset = HEADER.size + length
    tensors = {}
    for layer in manifest['layers']:
        count = int(np.prod(layer['shape'], dtype=np.int64))
        end = offset + count * FLOAT.itemsize
        if end > len(content):
            raise ParameterError(f'checkpoint is truncated at layer {layer["name"]}')
        data = np.frombuffer(content, dtype=FLOAT, count=count, offset=offset)
        tensors[layer['name']] = torch.from_numpy(data.astype(np.float32).reshape(layer['shape']))
        offset = end
    if offset != len(content):
        raise ParameterError('checkpoint has trailing bytes')
    return manifest, tensors


def save_checkpoint(path, agent, epoch=0, extra=None):
    content = encode_checkpoint(agent, epoch, extra)
    tmp_path = f'{path}.tmp'
    with open(tmp_path, 'wb') as f:
        f.write(content)
    os.replace(tmp_path, path)
    logger.debug('saved checkpoint %s (epoch %d)', path, epoch)


def config_from_manifest(data):
    names = {f.name for f in fields(LearnerConfig)}
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items() if k in names}
    return LearnerConfig(**values)


def load_checkpoint(path):
    with open(path, 'rb') as f:
        manifest, tensors = decode_checkpoint(f.read())
    agent = SACAgent(config_from_manifest(manifest['config']), manifest['mode'], manifest['seed'])
    agent.load_tensors(tensors)
    return agent, manifest
