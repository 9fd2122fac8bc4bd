# coding:utf-8

__project__ = "gridflare"
__version__ = "0.1.alpha.1"
__urlhome__ = "https://github.com/checkeys/gridflare/"
__description__ = "Fine-tune a behavior-cloned transformer policy with stabilized sparse-reward RL in a procedural gridworld"  # noqa:E501

# author
__author__ = "Mingzhe Zou"
__author_email__ = "zoumingzhe@outlook.com"
